"""Smile CSV files and versioned JSON report documents.

CSV schema: a ``strike,vol_percent`` header, ``#`` comment lines, one quote
per row. Vols are given in percent and converted to fractions on read.

Report floats are written with 17 significant digits so that every value
survives a dump/load cycle bit for bit.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import os
import tempfile
from decimal import Decimal, InvalidOperation
from importlib import resources
from pathlib import Path
from typing import Any

from svi_guard._version import __version__
from svi_guard.bounds import BoundVerdict, D1Limit
from svi_guard.calibration import CalibrationResult, MarketSmile, RestartSummary
from svi_guard.errors import DomainError, SmileFileError
from svi_guard.pricing import ForwardContext, OptionQuote
from svi_guard.scan import ArbitrageReport, Interval, ScanGrid
from svi_guard.svi import SviParams

SCHEMA_VERSION = 1
TOOL_NAME = "svi-guard"
CSV_HEADER = ("strike", "vol_percent")
SAMPLE_SMILE_CONTEXT = ForwardContext(forward=1.0, maturity=365.0 / 365.0, discount_factor=1.0)


def parse_smile_csv(text: str, ctx: ForwardContext, day_count_note: str = "") -> MarketSmile:
    """Parse CSV text into a :class:`MarketSmile`.

    Raises:
        SmileFileError: naming the 1-based line of the first problem.
    """
    header_seen = False
    quotes: list[OptionQuote] = []
    lines: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = [f.strip() for f in next(csv.reader([stripped]))]
        if not header_seen:
            if tuple(fields) != CSV_HEADER:
                raise SmileFileError(f"line {lineno}: expected header 'strike,vol_percent', got {stripped!r}")
            header_seen = True
            continue
        if len(fields) != 2:
            raise SmileFileError(f"line {lineno}: expected 2 fields, got {len(fields)}")
        try:
            strike = float(Decimal(fields[0]))
            vol = float(Decimal(fields[1]) / 100)
        except InvalidOperation:
            raise SmileFileError(f"line {lineno}: not a decimal number in {stripped!r}") from None
        try:
            quotes.append(OptionQuote(strike=strike, vol=vol))
        except DomainError as exc:
            raise SmileFileError(f"line {lineno}: {exc}") from None
        if quotes[:-1] and strike <= quotes[-2].strike:
            raise SmileFileError(f"line {lineno}: strikes must be strictly increasing")
        lines.append(lineno)
    if not header_seen:
        raise SmileFileError("line 1: missing 'strike,vol_percent' header")
    try:
        return MarketSmile(ctx=ctx, quotes=tuple(quotes), day_count_note=day_count_note)
    except DomainError as exc:
        where = lines[-1] if lines else 1
        raise SmileFileError(f"line {where}: {exc}") from None


def read_smile_csv(path: str | os.PathLike, ctx: ForwardContext, day_count_note: str = "") -> MarketSmile:
    return parse_smile_csv(Path(path).read_text(encoding="utf-8"), ctx, day_count_note)


def format_smile_csv(smile: MarketSmile) -> str:
    """Inverse of :func:`parse_smile_csv`: re-reading the text yields identical quotes."""
    rows = [",".join(CSV_HEADER)]
    for q in smile.quotes:
        # repr is the shortest exact decimal; scaling it by 100 in Decimal keeps it exact
        percent = Decimal(repr(q.vol)).scaleb(2)
        rows.append(f"{q.strike!r},{percent}")
    return "\n".join(rows) + "\n"


def load_sample_smile() -> MarketSmile:
    """The bundled one-year example smile (forward 1.0, ACT/365)."""
    text = resources.files("svi_guard").joinpath("data/sample_smile.csv").read_text(encoding="utf-8")
    return parse_smile_csv(text, SAMPLE_SMILE_CONTEXT, day_count_note="ACT/365, 365 days")


def sample_smile_path() -> Path:
    return Path(str(resources.files("svi_guard").joinpath("data/sample_smile.csv")))


def smile_digest(smile: MarketSmile) -> str:
    ctx = smile.ctx
    head = f"{ctx.forward!r},{ctx.discount_factor!r},{ctx.maturity!r}\n"
    return hashlib.sha256((head + format_smile_csv(smile)).encode("utf-8")).hexdigest()


# -- JSON ---------------------------------------------------------------------------------


def _float_token(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    token = format(x, ".17g")
    if not any(c in token for c in ".en"):
        token += ".0"
    return token


def _encode(obj: Any, level: int, indent: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return _float_token(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, level + 1, indent)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + _encode(v, level + 1, indent) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_document(doc: dict, indent: int = 2) -> str:
    return _encode(doc, 0, indent) + "\n"


def loads_document(text: str) -> dict:
    doc = json.loads(text)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise DomainError(f"unsupported schema_version {doc.get('schema_version')!r}")
    return doc


def write_atomic(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent or ".", prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def params_to_dict(p: SviParams) -> dict:
    return dataclasses.asdict(p)


def params_from_dict(d: dict) -> SviParams:
    return SviParams(**{k: float(d[k]) for k in ("a", "b", "s", "rho", "m")})


def verdict_to_dict(v: BoundVerdict) -> dict:
    d = dataclasses.asdict(v)
    d["d1_limit_class"] = v.d1_limit_class.value
    return d


def verdict_from_dict(d: dict) -> BoundVerdict:
    return BoundVerdict(**{**d, "d1_limit_class": D1Limit(d["d1_limit_class"])})


def report_to_dict(r: ArbitrageReport) -> dict:
    return {
        "grid": dataclasses.asdict(r.grid),
        "monotonicity_violations": [dataclasses.asdict(iv) for iv in r.monotonicity_violations],
        "negative_g_intervals": [dataclasses.asdict(iv) for iv in r.negative_g_intervals],
        "price_argmax_moneyness": r.price_argmax_moneyness,
        "verdict": verdict_to_dict(r.verdict),
        "arbitrage_detected": r.arbitrage_detected,
    }


def report_from_dict(d: dict) -> ArbitrageReport:
    return ArbitrageReport(
        monotonicity_violations=[Interval(**iv) for iv in d["monotonicity_violations"]],
        negative_g_intervals=[Interval(**iv) for iv in d["negative_g_intervals"]],
        price_argmax_moneyness=d["price_argmax_moneyness"],
        verdict=verdict_from_dict(d["verdict"]),
        grid=ScanGrid(**d["grid"]),
    )


def calibration_to_dict(c: CalibrationResult) -> dict:
    return {
        "params": params_to_dict(c.params),
        "max_wing_slope": c.params.max_wing_slope,
        "rmse": c.rmse,
        "objective": c.objective,
        "constraint_active": c.constraint_active,
        "slope_cap": c.slope_cap,
        "restarts_summary": {
            "best": c.restarts_summary.best,
            "median": c.restarts_summary.median,
            "best_index": c.restarts_summary.best_index,
            "objectives": list(c.restarts_summary.objectives),
        },
    }


def calibration_from_dict(d: dict) -> CalibrationResult:
    rs = d["restarts_summary"]
    return CalibrationResult(
        params=params_from_dict(d["params"]),
        rmse=d["rmse"],
        objective=d["objective"],
        constraint_active=d["constraint_active"],
        slope_cap=d["slope_cap"],
        restarts_summary=RestartSummary(
            best=rs["best"], median=rs["median"], best_index=rs["best_index"], objectives=tuple(rs["objectives"])
        ),
    )


def context_to_dict(ctx: ForwardContext) -> dict:
    return dataclasses.asdict(ctx)


def build_document(
    command: str,
    inputs: dict,
    report: ArbitrageReport | None = None,
    calibration: CalibrationResult | None = None,
    extra: dict | None = None,
) -> dict:
    doc: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": TOOL_NAME, "version": __version__},
        "command": command,
        "inputs": inputs,
    }
    if report is not None or calibration is not None:
        doc["calibration"] = None if calibration is None else calibration_to_dict(calibration)
    if report is not None:
        doc["arbitrage"] = report_to_dict(report)
        doc["verdict"] = verdict_to_dict(report.verdict)
    if extra:
        doc.update(extra)
    return doc
