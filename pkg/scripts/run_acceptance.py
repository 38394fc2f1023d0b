"""Run the acceptance criteria outside pytest and print one line per criterion.

    python scripts/run_acceptance.py          # all criteria
    python scripts/run_acceptance.py 2 6 8    # a subset
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from test_acceptance import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
