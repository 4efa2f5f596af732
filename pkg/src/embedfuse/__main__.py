"""Allow ``python -m embedfuse``."""

from embedfuse.cli import main

if __name__ == "__main__":
    raise SystemExit(main())
