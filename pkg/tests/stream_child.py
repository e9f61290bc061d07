"""Child process for the streaming-bound check.

Caps its own address space, then parses a synthetic multi-gigabyte
stream of repeated fixture sections.  Run:

    python stream_child.py FIXTURE_PATH TARGET_BYTES LIMIT_BYTES
"""

import itertools
import json
import resource
import sys


def main() -> int:
    fixture_path, target_bytes, limit_bytes = (
        sys.argv[1],
        int(sys.argv[2]),
        int(sys.argv[3]),
    )
    resource.setrlimit(resource.RLIMIT_AS, (limit_bytes, limit_bytes))

    from patentbulk.aps import ApsParser

    with open(fixture_path, encoding="latin-1") as handle:
        lines = handle.read().splitlines(keepends=True)
    bytes_per_repeat = sum(len(line) for line in lines)
    repeats = target_bytes // bytes_per_repeat + 1

    parser = ApsParser()
    stream = itertools.chain.from_iterable(itertools.repeat(lines, repeats))
    records = sum(1 for _ in parser.parse(stream))

    print(
        json.dumps(
            {
                "records": records,
                "repeats": repeats,
                "bytes_fed": bytes_per_repeat * repeats,
                "patn_sections": parser.report.patn_sections,
                "warnings": len(parser.report.warnings),
            }
        )
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
