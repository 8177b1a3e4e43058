import pytest

from contcat.evaluation import MatrixOracle, SyntheticConfig, generate_synthetic, true_order
from contcat.session import ItemBank


def synthetic_setup(thetas, seed, n_items=1000, k=0.1, b_gen=("normal", 0.0, 1.0)):
    """Score matrix, true-parameter bank, oracle and true order for ``thetas``."""
    mat, truth = generate_synthetic(
        SyntheticConfig(len(thetas), n_items, tuple(thetas), b_gen, k, seed)
    )
    bank = ItemBank.from_difficulties([truth.b[i] for i in mat.items], k, ids=mat.items)
    return mat, bank, MatrixOracle(mat), true_order(truth)


@pytest.fixture
def synthetic():
    return synthetic_setup


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
