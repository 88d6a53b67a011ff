#!/usr/bin/env python3
"""Scripted adapter for exercising the client side of the wire protocol.

usage: fake_adapter.py MODE WEIGHTS_JSON

WEIGHTS_JSON is a list of rows, one per output; each output is the dot
product of its row with the input. MODE selects a misbehaviour:

  linear        well behaved
  nan           second row of every batch is NaN
  close         exits halfway through the first predict reply
  short         returns one row fewer than requested
  error         answers every predict with an error message
  bad_hello     answers the handshake with garbage
  no_hello      exits before answering the handshake
  wrong_version answers the handshake with version 2
  slow          sleeps past any reasonable timeout on predict
  flaky_row     second row has the wrong width
"""

import json
import sys
import time

mode = sys.argv[1]
weights = json.loads(sys.argv[2]) if len(sys.argv) > 2 else [[1.0]]
n_in = len(weights[0])
n_out = len(weights)


def send(obj):
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


def predict(x):
    return [sum(w * v for w, v in zip(row, x)) for row in weights]


for line in sys.stdin:
    msg = json.loads(line)
    op = msg.get("op")
    if op == "hello":
        if mode == "no_hello":
            sys.exit(1)
        if mode == "bad_hello":
            sys.stdout.write("this is not json\n")
            sys.stdout.flush()
            continue
        version = 2 if mode == "wrong_version" else 1
        send({"op": "hello", "version": version, "n_inputs": n_in, "n_outputs": n_out})
    elif op == "predict":
        rows = [predict(x) for x in msg["inputs"]]
        if mode == "error":
            send({"op": "error", "message": "model exploded: input out of domain"})
        elif mode == "nan":
            body = ",".join(
                "[" + ",".join("NaN" if i == 1 else repr(v) for v in r) + "]"
                for i, r in enumerate(rows)
            )
            sys.stdout.write('{"op":"result","outputs":[' + body + "]}\n")
            sys.stdout.flush()
        elif mode == "close":
            text = json.dumps({"op": "result", "outputs": rows})
            sys.stdout.write(text[: len(text) // 2])
            sys.stdout.flush()
            sys.exit(0)
        elif mode == "short":
            send({"op": "result", "outputs": rows[:-1]})
        elif mode == "slow":
            time.sleep(30)
        elif mode == "flaky_row":
            if len(rows) > 1:
                rows[1] = rows[1] + [0.0]
            send({"op": "result", "outputs": rows})
        else:
            send({"op": "result", "outputs": rows})
    elif op == "bye":
        sys.exit(0)
