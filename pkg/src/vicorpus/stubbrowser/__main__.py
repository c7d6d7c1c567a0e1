"""Launchable entrypoint, flag-compatible with how Chromium gets started:

    python -m vicorpus.stubbrowser --remote-debugging-port=0 --user-data-dir=DIR

Unknown Chromium flags are accepted and ignored. The active port is written
to DevToolsActivePort inside the user data dir.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .protocol import StubBrowser


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="vicorpus-stub-browser", add_help=False)
    parser.add_argument("--remote-debugging-port", type=int, default=0)
    parser.add_argument("--user-data-dir", type=str, default=".")
    parser.add_argument("--log-level", type=str, default="WARNING")
    args, _ignored = parser.parse_known_args(argv)

    logging.basicConfig(level=args.log_level.upper(), format="stub-browser %(levelname)s %(message)s")
    browser = StubBrowser(http_port=args.remote_debugging_port)
    browser.start()

    data_dir = Path(args.user_data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    (data_dir / "DevToolsActivePort").write_text(f"{browser.http_port}\n/devtools/browser/stub\n")

    try:
        browser.wait()
    except KeyboardInterrupt:
        pass
    finally:
        browser.shutdown()
    return 0


if __name__ == "__main__":
    sys.exit(main())
