# app/subjects/echo.py
"""
Reference external subject: answers every protocol request with its own input.

Runs with nothing but the standard library so that it can be started as
`python -m app.subjects.echo` or directly by file path. The fault flags make it
misbehave on purpose for exercising the runner.
"""
import argparse
import json
import sys
import time


def create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Echo subject for the line-delimited protocol.")
    parser.add_argument("--malformed-after", type=int, default=None, metavar="N",
                        help="Write a line that is not JSON instead of the response to request N+1.")
    parser.add_argument("--crash-after", type=int, default=None, metavar="N",
                        help="Exit with status 1 on receiving request N+1.")
    parser.add_argument("--hang-after", type=int, default=None, metavar="N",
                        help="Stop answering (sleep) on receiving request N+1.")
    parser.add_argument("--error-on", default=None, metavar="TAG",
                        help="Answer with an error for inputs of this datum tag, e.g. 'text'.")
    return parser


def respond(request: dict, error_on: str | None) -> dict:
    payload = request.get("input")
    if error_on is not None and isinstance(payload, dict) and error_on in payload:
        return {"id": request["id"], "error": f"refusing {error_on} input"}
    return {"id": request["id"], "output": payload}


def serve(args: argparse.Namespace, stdin=sys.stdin, stdout=sys.stdout) -> int:
    handled = 0
    for line in stdin:
        if not line.strip():
            continue
        if args.crash_after is not None and handled >= args.crash_after:
            return 1
        if args.hang_after is not None and handled >= args.hang_after:
            time.sleep(3600)
        if args.malformed_after is not None and handled >= args.malformed_after:
            stdout.write("this is not a protocol line\n")
        else:
            stdout.write(json.dumps(respond(json.loads(line), args.error_on)) + "\n")
        stdout.flush()
        handled += 1
    return 0


if __name__ == "__main__":
    sys.exit(serve(create_parser().parse_args()))
