"""Reference executor speaking the mrt harness protocol (JSON lines on stdio).

Used by the integration tests. Requests: {"id", "op", "code", "table_path",
"timeout_s", "out_path"}; one reply per request. Timeouts are enforced by the
supervisor, which kills this process.
"""

import ast
import contextlib
import io
import json
import math
import sys
import traceback

import numpy as np
import pandas as pd

ENTRY = "parse_dataframe"
OUT = sys.stdout


def reply(obj):
    OUT.write(json.dumps(obj, allow_nan=False) + "\n")
    OUT.flush()


def failure(rid, error_type, message, tb=None):
    out = {"id": rid, "ok": False, "error_type": error_type, "error_message": message}
    if tb is not None:
        out["traceback"] = tb
    return out


def scalar(v):
    """JSON scalar and kind for v, or None when v is not scalar."""
    if v is None or v is pd.NA or v is pd.NaT:
        return None, "null"
    if isinstance(v, (bool, np.bool_)):
        return bool(v), "bool"
    if isinstance(v, (int, np.integer)):
        return int(v), "int"
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isnan(f):
            return None, "null"
        if math.isinf(f):
            return str(f), "other"
        return f, "float"
    if isinstance(v, str):
        return v, "string"
    return None


def element(v):
    s = scalar(v)
    if s is not None:
        return s[0]
    try:
        return str(v)
    except Exception:
        return "<unprintable>"


def serialize(v):
    s = scalar(v)
    if s is not None:
        return s
    if isinstance(v, pd.DataFrame):
        if v.shape[1] == 1:
            return [element(x) for x in v.iloc[:, 0].tolist()], "list"
        return str(v), "other"
    if isinstance(v, (pd.Series, pd.Index, np.ndarray, list, tuple, set, frozenset)):
        items = v.tolist() if hasattr(v, "tolist") else list(v)
        if isinstance(v, (set, frozenset)):
            items = sorted(items, key=str)
        return [element(x) for x in items], "list"
    try:
        return str(v), "other"
    except Exception:
        return "<unprintable>", "other"


def check_code(code):
    try:
        tree = ast.parse(code, "<generated>")
        compile(tree, "<generated>", "exec")
    except SyntaxError as e:
        return "SyntaxError", f"{e.msg} (line {e.lineno}, offset {e.offset})"
    for node in tree.body:
        if isinstance(node, ast.FunctionDef) and node.name == ENTRY:
            a = node.args
            n = len(a.posonlyargs) + len(a.args) + len(a.kwonlyargs)
            if n != 1 or a.vararg or a.kwarg:
                return "ContractError", f"{ENTRY} must take exactly one parameter"
            return None
    return "ContractError", f"no top-level function named {ENTRY}"


def op_check(rid, req):
    problem = check_code(req.get("code") or "")
    if problem:
        return failure(rid, *problem)
    return {"id": rid, "ok": True, "value": True, "value_kind": "bool"}


def op_run(rid, req):
    code = req.get("code") or ""
    problem = check_code(code)
    if problem:
        return failure(rid, *problem)
    try:
        df = pd.read_csv(req["table_path"])
    except Exception as e:
        return failure(rid, "TableLoadError", str(e))
    captured = io.StringIO()
    namespace = {"pd": pd, "np": np, "__name__": "generated"}
    try:
        with contextlib.redirect_stdout(captured):
            exec(compile(code, "<generated>", "exec"), namespace)
            result = namespace[ENTRY](df)
    except Exception as e:
        tb = traceback.format_exc(limit=-4)
        printed = captured.getvalue()
        if printed:
            tb += "\n--- captured output ---\n" + printed[-2000:]
        return failure(rid, type(e).__name__, str(e), tb)
    value, kind = serialize(result)
    return {"id": rid, "ok": True, "value": value, "value_kind": kind}


def op_convert(rid, req):
    src, dst = req.get("table_path"), req.get("out_path")
    try:
        if str(src).endswith(".parquet"):
            df = pd.read_parquet(src)
        else:
            df = pd.read_csv(src)
        df.to_csv(dst, index=False, na_rep="")
    except Exception as e:
        return failure(rid, "ConvertError", f"{type(e).__name__}: {e}")
    return {"id": rid, "ok": True, "value": dst, "value_kind": "string"}


OPS = {"check": op_check, "run": op_run, "convert": op_convert}


def main():
    reply({"hello": 1})
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            rid = req.get("id")
        except Exception as e:
            reply(failure(None, "ProtocolError", str(e)))
            continue
        handler = OPS.get(req.get("op"))
        if handler is None:
            reply(failure(rid, "ProtocolError", f"unknown op {req.get('op')!r}"))
            continue
        try:
            reply(handler(rid, req))
        except Exception as e:
            reply(failure(rid, "HarnessError", f"{type(e).__name__}: {e}"))


if __name__ == "__main__":
    main()
