import warnings

import pytest

warnings.filterwarnings("ignore", message=".*TBB.*")


@pytest.fixture
def emit(capsys):
    """Print a line to the real terminal even while pytest captures output."""

    def _emit(line):
        with capsys.disabled():
            print(line)

    return _emit
