"""Reference child processes for the subprocess oracle protocol.

``serve`` implements the child side: handshake, then read batches (header,
rows, blank line) from stdin and answer one prediction per row.
"""

import csv
import sys

HANDSHAKE = "EFFSIZE-ORACLE 1"


def serve(predict, stdin=None, stdout=None):
    """Run the protocol loop. ``predict(header, rows)`` returns one float per row."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    stdout.write(HANDSHAKE + "\n")
    stdout.flush()
    batch = []
    for line in stdin:
        line = line.rstrip("\n")
        if line:
            batch.append(line)
            continue
        if not batch:
            continue
        header, *rows = list(csv.reader(batch))
        values = [[float(v) for v in row] for row in rows]
        for pred in predict(header, values):
            stdout.write(repr(float(pred)) + "\n")
        stdout.flush()
        batch = []
