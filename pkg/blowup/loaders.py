"""Readers for the system catalog and symbol files (INI-style key = value)."""

import configparser
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import ValidationError

from .exceptions import InputFileError
from .hbcore import Nonlinearity, SymbolPolynomial
from .lvmodel import InteractionTerm, LVSystem, TermKind
from .schemas import NonlinearityRecord, SearchBox, SymbolRecord, SystemRecord

logger = logging.getLogger(__name__)


def parse_float_list(text: str) -> List[float]:
    """'0, 1, -2.5' -> [0.0, 1.0, -2.5]; blank -> []."""
    text = text.strip()
    if not text:
        return []
    try:
        return [float(item) for item in text.replace(";", ",").split(",")]
    except ValueError as exc:
        raise InputFileError(f"not a list of numbers: {text!r}") from exc


def _read(path: Path) -> configparser.ConfigParser:
    path = Path(path)
    if not path.is_file():
        raise InputFileError(f"input file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise InputFileError(f"{path}: {exc}") from exc
    return parser


def load_catalog(path: Path) -> Dict[str, SystemRecord]:
    """Every section of a catalog file, keyed by section name, in file order."""
    parser = _read(path)
    records: Dict[str, SystemRecord] = {}
    for name in parser.sections():
        raw = dict(parser[name])
        for key in ("coeffs", "lambda_coeffs"):
            if key in raw:
                raw[key] = parse_float_list(raw[key])
        try:
            records[name] = SystemRecord(name=name, **raw)
        except ValidationError as exc:
            raise InputFileError(f"{path} [{name}]: {exc}") from exc
    if not records:
        raise InputFileError(f"{path} holds no system sections")
    return records


def select_system(path: Path, name: Optional[str] = None) -> SystemRecord:
    records = load_catalog(path)
    if name is None:
        if len(records) > 1:
            raise InputFileError(
                f"{path} holds {len(records)} systems ({', '.join(records)}); pick one by name"
            )
        return next(iter(records.values()))
    if name not in records:
        raise InputFileError(f"{path} has no system named {name!r}")
    return records[name]


def build_system(record: SystemRecord) -> LVSystem:
    if record.term == "polynomial":
        term = InteractionTerm.polynomial(record.coeffs, record.lambda_coeffs)
    else:
        term = InteractionTerm(TermKind(record.term))
    return LVSystem(a=record.a, b=record.b, c=record.c, d=record.d, term=term, name=record.name)


def load_symbol_file(
    path: Path,
) -> Tuple[SymbolRecord, Optional[NonlinearityRecord], Optional[SearchBox]]:
    """[symbol] degree and a0..a{l-1}; optional [root], [nonlinearity] and [box]."""
    parser = _read(path)
    if not parser.has_section("symbol"):
        raise InputFileError(f"{path} has no [symbol] section")
    section = parser["symbol"]
    try:
        degree = section.getint("degree")
    except ValueError as exc:
        raise InputFileError(f"{path}: degree must be an integer") from exc
    if degree is None:
        raise InputFileError(f"{path}: [symbol] needs a degree")
    coefficients = [parse_float_list(section.get(f"a{k}", "")) for k in range(degree)]

    root_w = root_lambda = None
    if parser.has_section("root"):
        root_w = parser["root"].getfloat("w")
        root_lambda = parser["root"].getfloat("lambda")

    try:
        symbol = SymbolRecord(
            degree=degree,
            coefficients=coefficients,
            root_w=root_w,
            root_lambda=root_lambda,
        )
        nonlinearity = (
            NonlinearityRecord(**dict(parser["nonlinearity"]))
            if parser.has_section("nonlinearity")
            else None
        )
        box = SearchBox(**dict(parser["box"])) if parser.has_section("box") else None
    except ValidationError as exc:
        raise InputFileError(f"{path}: {exc}") from exc
    return symbol, nonlinearity, box


def build_symbol(record: SymbolRecord, label: str = "symbol") -> SymbolPolynomial:
    return SymbolPolynomial(record.coefficients, label=label)


def build_nonlinearity(record: Optional[NonlinearityRecord]) -> Nonlinearity:
    if record is None:
        logger.info("no [nonlinearity] section; using f = 0")
        return Nonlinearity.zero()
    return Nonlinearity.from_kind(record.kind, record.epsilon, record.lambda_bound)
