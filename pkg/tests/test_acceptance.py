import pytest

from affine_ifs import acceptance

from .conftest import ACCEPTANCE_LINES


@pytest.fixture(scope="module", autouse=True)
def compiled():
    # runtime limits are for the computation, not for compiling kernels
    acceptance.warmup()


@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA))
def test_criterion(number, capsys):
    result = acceptance.CRITERIA[number]()
    ACCEPTANCE_LINES.append(result.line)
    with capsys.disabled():
        print(f"\n{result.line}")
    assert result.passed, result.line
