"""Plain-text configuration, record files and result artifacts.

Config files are flat ``key = value`` lines (``#`` starts a comment). Keys
are the ``ModelParams`` field names plus ``initial_state`` (``thermal``,
``fock:N`` or ``coherent:MEAN``), ``n_samples``, ``injection_sample``,
``emission_probability`` and ``seed``. Angles accept ``pi`` expressions
such as ``3*pi/4``.

A record file is a ``key = value`` header followed by the line
``sample_index,phase_index,outcomes`` and one row per sample; ``outcomes``
is a string over ``g``/``e``, empty when nothing was detected::

    # pqsphoton record v1
    n_samples = 3
    resonant_samples =
    model.n_max = 25
    ...
    sample_index,phase_index,outcomes
    0,0,
    1,1,g
    2,2,ge

Header keys ``truth.initial_n``, ``truth.jump_times`` and
``truth.photon_numbers`` are optional.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
import os
import re
import tempfile
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, RecordParseError
from .fock import ModelParams
from .record import DetectionRecord, TruthTrajectory
from .simulate import InitialState, Injection, SimConfig, calibrate_emission_probability

RECORD_MAGIC = "# pqsphoton record v1"
COLUMNS = "sample_index,phase_index,outcomes"

_MODEL_FIELDS = {f.name: f.type for f in fields(ModelParams)}
_INT_FIELDS = {"n_max"}
_SIM_KEYS = {"initial_state", "n_samples", "injection_sample", "emission_probability", "seed"}
_PI_EXPR = re.compile(r"^\s*([-+]?\d*\.?\d*(?:[eE][-+]?\d+)?)\s*\*?\s*pi\s*(?:/\s*(\d*\.?\d+))?\s*$")


def fmt(x) -> str:
    """Shortest decimal string that round-trips the double ``x``."""
    return repr(float(x))


def parse_real(text: str) -> float:
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    m = _PI_EXPR.match(text)
    if not m:
        raise ValueError(f"not a number: {text!r}")
    coef = m.group(1)
    coef = 1.0 if coef in ("", "+") else -1.0 if coef == "-" else float(coef)
    div = float(m.group(2)) if m.group(2) else 1.0
    return coef * math.pi / div


def _parse_kv(lines, source="config"):
    out = {}
    for lineno, raw in lines:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise RecordParseError(f"expected 'key = value' in {source}", lineno)
        out[key.strip()] = (value.strip(), lineno)
    return out


def model_from_mapping(values: dict) -> ModelParams:
    """Build ``ModelParams`` from string values, reporting every problem at once."""
    kwargs, problems = {}, []
    for key, text in values.items():
        if key not in _MODEL_FIELDS:
            problems.append(f"unknown model key {key!r}")
            continue
        try:
            if key in _INT_FIELDS:
                kwargs[key] = int(text)
            elif key == "phases":
                kwargs[key] = tuple(parse_real(p) for p in text.split(",") if p.strip())
            else:
                kwargs[key] = parse_real(text)
        except ValueError as exc:
            problems.append(f"{key}: {exc}")
    try:
        model = ModelParams(**kwargs)
    except ConfigError as exc:
        problems += exc.problems
    if problems:
        raise ConfigError(problems)
    return model


def load_config(path) -> SimConfig:
    """Read a flat key-value config file into a ``SimConfig``."""
    return parse_config(Path(path).read_text())


def parse_config(text: str) -> SimConfig:
    kv = _parse_kv(enumerate(text.splitlines(), 1))
    model_vals = {k: v for k, (v, _) in kv.items() if k not in _SIM_KEYS}
    sim = {k: v for k, (v, _) in kv.items() if k in _SIM_KEYS}
    problems = []
    model = None
    try:
        model = model_from_mapping(model_vals)
    except ConfigError as exc:
        problems += exc.problems
    try:
        initial = InitialState.parse(sim.get("initial_state", "thermal"))
        n_samples = int(sim.get("n_samples", "7000"))
        seed = int(sim.get("seed", "0"))
        injection = None
        if sim.get("injection_sample", "").strip():
            if "emission_probability" in sim:
                p_em = parse_real(sim["emission_probability"])
            else:
                p_em = calibrate_emission_probability(model) if model else 0.95
            injection = Injection(int(sim["injection_sample"]), p_em)
    except (ValueError, ConfigError) as exc:
        problems += getattr(exc, "problems", [str(exc)])
        initial = None
    if problems:
        raise ConfigError(problems)
    return SimConfig(model, initial, n_samples, injection, seed)


def dump_config(config: SimConfig) -> str:
    lines = ["# pqsphoton simulation config (SI units)"]
    for key, value in config.model.as_dict().items():
        if key == "phases":
            value = ",".join(fmt(p) for p in value)
        elif key in _INT_FIELDS:
            value = str(value)
        else:
            value = fmt(value)
        lines.append(f"{key} = {value}")
    lines.append(f"initial_state = {config.initial_state}")
    lines.append(f"n_samples = {config.n_samples}")
    if config.injection is not None:
        lines.append(f"injection_sample = {config.injection.at_sample}")
        lines.append(f"emission_probability = {fmt(config.injection.emission_probability)}")
    lines.append(f"seed = {config.seed}")
    return "\n".join(lines) + "\n"


def config_hash(config: SimConfig) -> str:
    return hashlib.sha256(dump_config(config).encode()).hexdigest()


def atomic_write(path, data: str | bytes) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---- records ---------------------------------------------------------------


def format_record(record: DetectionRecord) -> str:
    out = [RECORD_MAGIC]
    out.append(f"n_samples = {record.n_samples}")
    out.append("resonant_samples = " + ",".join(str(s) for s in record.resonant_samples))
    out.append(f"seed = {'' if record.seed is None else record.seed}")
    for key in sorted(record.meta):
        out.append(f"meta.{key} = {record.meta[key]}")
    for key, value in record.params.as_dict().items():
        if key == "phases":
            value = ",".join(fmt(p) for p in value)
        elif key not in _INT_FIELDS:
            value = fmt(value)
        out.append(f"model.{key} = {value}")
    if record.truth is not None:
        t = record.truth
        out.append(f"truth.initial_n = {t.initial_n}")
        out.append("truth.jump_times = " + ",".join(fmt(x) for x in t.jump_times))
        out.append("truth.photon_numbers = " + ",".join(str(int(x)) for x in t.photon_numbers))
    out.append(COLUMNS)
    rows = [
        f"{s},{k},{'g' * g}{'e' * e}"
        for s, (k, g, e) in enumerate(zip(record.phase_index.tolist(), record.n_g.tolist(), record.n_e.tolist()))
    ]
    return "\n".join(out + rows) + "\n"


def write_record(record: DetectionRecord, path) -> None:
    atomic_write(path, format_record(record))


def _meta_value(text):
    try:
        return int(text)
    except ValueError:
        return text


def parse_record(text: str) -> DetectionRecord:
    lines = text.splitlines()
    if not lines or lines[0].strip() != RECORD_MAGIC:
        raise RecordParseError(f"missing header line {RECORD_MAGIC!r}", 1)
    try:
        split = next(i for i, line in enumerate(lines) if line.strip() == COLUMNS)
    except StopIteration:
        raise RecordParseError(f"missing column line {COLUMNS!r}") from None
    header = _parse_kv(((i + 1, lines[i]) for i in range(1, split)), "record header")

    def get(key, default=None):
        return header[key][0] if key in header else default

    try:
        params = model_from_mapping(
            {k[len("model."):]: v for k, (v, _) in header.items() if k.startswith("model.")}
        )
    except ConfigError as exc:
        raise RecordParseError(f"invalid model section: {exc}") from None
    try:
        S = int(get("n_samples"))
    except (TypeError, ValueError):
        raise RecordParseError("n_samples missing or not an integer", header.get("n_samples", ("", None))[1]) from None
    resonant = tuple(int(x) for x in get("resonant_samples", "").split(",") if x.strip())
    seed_text = get("seed", "")
    seed = int(seed_text) if seed_text else None
    meta = {k[len("meta."):]: _meta_value(v) for k, (v, _) in header.items() if k.startswith("meta.")}
    truth = None
    if "truth.initial_n" in header:
        try:
            jt = [float(x) for x in get("truth.jump_times", "").split(",") if x.strip()]
            pn = [int(x) for x in get("truth.photon_numbers", "").split(",") if x.strip()]
            truth = TruthTrajectory(np.array(jt), np.array(pn), int(get("truth.initial_n")))
        except ValueError as exc:
            raise RecordParseError(f"invalid truth section: {exc}", header["truth.initial_n"][1]) from None

    phase = np.zeros(S, dtype=np.int64)
    n_g = np.zeros(S, dtype=np.int64)
    n_e = np.zeros(S, dtype=np.int64)
    body = [(i + 1, line) for i, line in enumerate(lines) if i > split and line.strip()]
    if len(body) != S:
        raise RecordParseError(f"expected {S} sample rows, found {len(body)}", body[-1][0] if body else split + 1)
    for expected, (lineno, line) in enumerate(body):
        parts = line.split(",")
        if len(parts) != 3:
            raise RecordParseError("expected 'sample_index,phase_index,outcomes'", lineno)
        try:
            s, k = int(parts[0]), int(parts[1])
        except ValueError:
            raise RecordParseError("sample_index and phase_index must be integers", lineno) from None
        if s != expected:
            raise RecordParseError(f"sample_index {s} out of order (expected {expected})", lineno)
        if not 0 <= k < params.n_phases:
            raise RecordParseError(f"phase_index {k} out of range", lineno)
        outcomes = parts[2].strip()
        if set(outcomes) - {"g", "e"}:
            raise RecordParseError(f"outcomes must be a g/e string, got {outcomes!r}", lineno)
        phase[s] = k
        n_g[s] = outcomes.count("g")
        n_e[s] = outcomes.count("e")
    try:
        return DetectionRecord(params, phase, n_g, n_e, resonant, truth, seed, meta)
    except (ValueError, IndexError) as exc:
        raise RecordParseError(str(exc)) from None


def read_record(path) -> DetectionRecord:
    return parse_record(Path(path).read_text())


# ---- result artifacts ------------------------------------------------------


def _csv_text(header, columns) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*columns):
        w.writerow([x if isinstance(x, (int, np.integer)) else fmt(x) for x in row])
    return buf.getvalue()


def trajectory_csv(traj, summaries) -> str:
    """Per-time forward/backward/PQS distributions followed by mean/std/map per analysis."""
    N = traj.forward.shape[1]
    header = ["t"]
    cols = [traj.times]
    for tag, arr in (("fwd", traj.forward), ("bwd", traj.backward), ("pqs", traj.pqs)):
        header += [f"P_{tag}_{n}" for n in range(N)]
        cols += [arr[:, n] for n in range(N)]
    for tag, key in (("fwd", "forward"), ("bwd", "backward"), ("pqs", "pqs")):
        s = summaries[key]
        header += [f"mean_{tag}", f"std_{tag}", f"map_{tag}"]
        cols += [s.mean_n, s.std_n, s.map_n.astype(np.int64)]
    return _csv_text(header, cols)


def experiment_csv(result, fit_values=None) -> str:
    if result.experiment == 1:
        return _csv_text(
            ["t_seconds", "sigma_fwd", "sigma_bwd", "sigma_pqs"],
            [result.times, result.avg_std["forward"], result.avg_std["backward"], result.avg_std["pqs"]],
        )
    if fit_values is None:
        fit_values = result.fit(result.times) if result.fit is not None else np.full(len(result.times), np.nan)
    return _csv_text(
        ["t_seconds", "mean_fwd", "mean_bwd", "mean_pqs", "fit_value"],
        [result.times, result.avg_mean["forward"], result.avg_mean["backward"], result.avg_mean["pqs"], fit_values],
    )


def to_json(obj) -> str:
    def default(o):
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(f"not JSON serializable: {type(o).__name__}")

    return json.dumps(obj, indent=2, sort_keys=True, default=default) + "\n"


@dataclass
class RunManifest:
    config_hash: str
    root_seed: int
    command: str
    artifact_paths: list
    tool_version: str

    def write(self, path) -> None:
        atomic_write(path, to_json(self.__dict__))
