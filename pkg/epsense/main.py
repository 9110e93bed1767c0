"""
main.py

Console entry point: loads `.env`, then hands the arguments to the CLI.
"""

import sys

from dotenv import load_dotenv

from epsense.cli import run


def main() -> None:
    load_dotenv()
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
