"""Monte Carlo orchestration: configs, frame simulation, sweeps and CSV output.

Seeding: frame ``f`` of any sweep point draws everything from
``SeedSequence(seed, spawn_key=(f,))``. Sweep points therefore share bits,
channels and normalized noise (common random numbers), and results do not
depend on how frames are spread over workers.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import itertools
import json
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import __version__, channel, linalg, ofdm, receivers
from .errors import ConfigurationError
from .ldpc import preset

CSV_FIELDS = [
    "receiver", "snr_db", "xi", "eps1", "eps2", "M", "frames", "bits",
    "bit_errors", "ber", "frame_errors", "mean_decoder_iters",
]

SWEEP_AXES = ("snr_db", "xi", "eps2", "M")


@dataclass
class SimConfig:
    n: int = 128
    k: int | None = None
    cir_length: int = 6
    cp_length: int = 16
    blocks_per_frame: int = 10
    code: str = "paper-scale"
    modulation: str = "bpsk"
    snr_db: list = field(default_factory=lambda: [15.0])
    cfo_mode: str = "constant"
    xi: list = field(default_factory=lambda: [0.1])
    cfo_signs: tuple = (-1, 1)
    eps1: float | None = None
    eps2: list | None = None
    receivers: list = field(default_factory=lambda: ["proposed", "mean", "none", "sync"])
    sage_iterations: list = field(default_factory=lambda: [2])
    cfo_update: str = "auto"
    bootstrap: str = "joint"
    cfo_step: str = "phase-aware"
    max_frames: int = 100
    min_bit_errors: int = 200
    batch_frames: int = 8
    decoder_iters: int = 50
    seed: int = 1

    def __post_init__(self):
        for name in ("snr_db", "xi", "sage_iterations"):
            v = getattr(self, name)
            setattr(self, name, list(v) if isinstance(v, (list, tuple)) else [v])
        if self.eps2 is not None and not isinstance(self.eps2, (list, tuple)):
            self.eps2 = [self.eps2]
        self.cfo_signs = tuple(self.cfo_signs)
        self.validate()

    @property
    def num_subcarriers(self) -> int:
        return self.n if self.k is None else self.k

    @property
    def cfo_update_mode(self) -> str:
        if self.cfo_update == "auto":
            return "first-block-only" if self.cfo_mode == "constant" else "every-block"
        return self.cfo_update

    def validate(self) -> None:
        if not linalg.is_power_of_two(self.n):
            raise ConfigurationError(f"N={self.n} must be a power of two")
        if not 1 <= self.num_subcarriers <= self.n:
            raise ConfigurationError(f"K={self.k} must be in 1..N")
        if not 1 <= self.cir_length <= self.cp_length <= self.n:
            raise ConfigurationError("need 1 <= L <= N_g <= N")
        if self.blocks_per_frame < 1:
            raise ConfigurationError("blocks_per_frame must be >= 1")
        if self.modulation not in ofdm.CONSTELLATIONS:
            raise ConfigurationError(f"unsupported modulation {self.modulation!r}")
        unknown = set(self.receivers) - set(receivers.RECEIVERS)
        if unknown:
            raise ConfigurationError(f"unknown receivers {sorted(unknown)}")
        if self.cfo_update not in ("auto", "every-block", "first-block-only"):
            raise ConfigurationError(f"unknown cfo_update {self.cfo_update!r}")
        if self.bootstrap not in ("per-terminal", "joint"):
            raise ConfigurationError(f"unknown bootstrap {self.bootstrap!r}")
        if self.cfo_step not in ("plain", "phase-aware"):
            raise ConfigurationError(f"unknown cfo_step {self.cfo_step!r}")
        if any(m < 0 for m in self.sage_iterations):
            raise ConfigurationError("SAGE iterations must be >= 0")
        if (self.eps1 is None) != (self.eps2 is None):
            raise ConfigurationError("eps1 and eps2 must be given together")
        # fail early on schedules leaving (-1/2, 1/2)
        for p in self.points():
            sched = self.schedule(p)
            for b in range(self.blocks_per_frame + 1):
                sched.at(b)

    def points(self) -> list[dict]:
        eps2s = self.eps2 if self.eps2 is not None else [None]
        out = []
        for snr, xi, e2, m in itertools.product(self.snr_db, self.xi, eps2s, self.sage_iterations):
            out.append({"snr_db": float(snr), "xi": float(xi), "eps2": e2, "M": int(m)})
        return out

    def schedule(self, point: dict) -> channel.CfoSchedule:
        eps = None if point["eps2"] is None else (float(self.eps1), float(point["eps2"]))
        return channel.CfoSchedule(mode=self.cfo_mode, xi=point["xi"], signs=self.cfo_signs, eps=eps)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True, default=str).encode()).hexdigest()[:16]


def load_config(path, **overrides) -> SimConfig:
    """Read a flat ``key: value`` YAML file; lists give sweep axes."""
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ConfigurationError("config file must be a flat mapping")
    known = {f.name for f in dataclasses.fields(SimConfig)}
    bad = set(raw) - known
    if bad:
        raise ConfigurationError(f"unknown config keys {sorted(bad)}")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return SimConfig(**raw)


def make_context(cfg: SimConfig, iterations: int) -> receivers.ReceiverContext:
    alloc = ofdm.SubcarrierAllocation(np.arange(cfg.num_subcarriers), cfg.n)
    code = preset(cfg.code)
    const = ofdm.CONSTELLATIONS[cfg.modulation]
    layout = ofdm.FrameLayout(code.n, alloc.k, cfg.blocks_per_frame, const.bits_per_symbol)
    cov = np.diag(channel.power_delay_profile(cfg.cir_length)).astype(complex)
    return receivers.ReceiverContext(
        alloc=alloc, code=code, layout=layout, covs=(cov, cov), cir_length=cfg.cir_length,
        iterations=iterations, cfo_update=cfg.cfo_update_mode, bootstrap=cfg.bootstrap, cfo_step=cfg.cfo_step,
        constellation=const, decoder_iters=cfg.decoder_iters,
    )


def frame_rng(seed: int, frame: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(frame,)))


def simulate_frame(cfg: SimConfig, point: dict, ctx: receivers.ReceiverContext,
                   rng: np.random.Generator) -> receivers.FrameObservation:
    """Bits -> codewords -> BPSK grid -> per-block MAC phase (+ zero-CFO twin) -> AWGN."""
    code, layout, alloc = ctx.code, ctx.layout, ctx.alloc
    n = alloc.n
    msgs = rng.integers(0, 2, size=(2, layout.codewords, code.k), dtype=np.int8)
    cirs = [channel.draw_cir(cfg.cir_length, rng) for _ in range(2)]
    noise = (rng.standard_normal((cfg.blocks_per_frame + 1, n))
             + 1j * rng.standard_normal((cfg.blocks_per_frame + 1, n))) / np.sqrt(2)

    symbols = np.stack([
        ctx.constellation.map(layout.to_grid(code.encode(msgs[i]).ravel())).reshape(cfg.blocks_per_frame, alloc.k)
        for i in range(2)
    ])
    noise_var = channel.noise_variance(point["snr_db"], alloc.k, n)
    sched = cfg.schedule(point)
    eps = [sched.at(b) for b in range(cfg.blocks_per_frame + 1)]
    h = tuple(c.taps for c in cirs)

    def observe(x1, x2, e, w):
        clean = ofdm.mac_signal_model(x1, x2, h[0], h[1], e[0], e[1])
        return clean + np.sqrt(noise_var) * w

    p1, p2 = ctx.pilots
    with linalg.suspended():
        y_pre = observe(p1, p2, eps[0], noise[0])
        y_pre_sync = observe(p1, p2, (0.0, 0.0), noise[0])
        xs = [[alloc.allocate(symbols[i, b]) for b in range(cfg.blocks_per_frame)] for i in range(2)]
        y = np.stack([observe(xs[0][b], xs[1][b], eps[b + 1], noise[b + 1]) for b in range(cfg.blocks_per_frame)])
        y_sync = np.stack([observe(xs[0][b], xs[1][b], (0.0, 0.0), noise[b + 1]) for b in range(cfg.blocks_per_frame)])
    return receivers.FrameObservation(
        y_pre=y_pre, y=y, y_pre_sync=y_pre_sync, y_sync=y_sync, noise_var=noise_var,
        eps=eps, h_true=h, symbols=symbols, xor_message=msgs[0] ^ msgs[1],
    )


@dataclass
class TrialResult:
    """Outcome of one frame for each receiver."""

    frame: int
    bit_errors: dict
    bits: dict
    frame_error: dict
    decoder_iters: dict
    traces: list | None = None
    bit_log: dict | None = None


def run_frame(cfg: SimConfig, point: dict, frame: int, receiver_names=None,
              keep_traces: bool = False, keep_bits: bool = False) -> TrialResult:
    names = list(receiver_names or cfg.receivers)
    ctx = make_context(cfg, point["M"])
    obs = simulate_frame(cfg, point, ctx, frame_rng(cfg.seed, frame))
    res = TrialResult(frame=frame, bit_errors={}, bits={}, frame_error={}, decoder_iters={})
    if keep_traces:
        res.traces = []
    if keep_bits:
        res.bit_log = {"truth": obs.xor_message.copy()}
    for name in names:
        if name == "proposed":
            grid = receivers.proposed(obs, ctx, traces=res.traces if keep_traces else None)
        else:
            grid = receivers.RECEIVERS[name](obs, ctx)
        decoded, status = receivers.decode_frame(grid, ctx)
        errs = int(np.sum(decoded != obs.xor_message))
        res.bit_errors[name] = errs
        res.bits[name] = int(obs.xor_message.size)
        res.frame_error[name] = int(errs > 0)
        res.decoder_iters[name] = float(np.mean(status["iterations"]))
        if keep_bits:
            res.bit_log[name] = decoded.copy()
    return res


def _run_frame_task(args):
    return run_frame(*args)


@dataclass
class PointResult:
    receiver: str
    point: dict
    eps: tuple
    frames: int = 0
    bits: int = 0
    bit_errors: int = 0
    frame_errors: int = 0
    decoder_iters: float = 0.0
    per_frame_errors: list = field(default_factory=list)

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else float("nan")

    def ber_interval(self, z: float = 1.96) -> tuple[float, float]:
        """Normal-approximation interval treating frames as the independent unit."""
        e = np.asarray(self.per_frame_errors, dtype=float)
        f = len(e)
        if f < 2 or self.bits == 0:
            return (float("nan"), float("nan"))
        per = self.bits / f
        se = np.sqrt(np.sum((e - self.ber * per) ** 2) / (f - 1) / f) / per
        return (max(0.0, self.ber - z * se), self.ber + z * se)

    def row(self) -> dict:
        p = self.point
        return {
            "receiver": self.receiver, "snr_db": p["snr_db"], "xi": p["xi"],
            "eps1": self.eps[0], "eps2": self.eps[1], "M": p["M"], "frames": self.frames,
            "bits": self.bits, "bit_errors": self.bit_errors, "ber": self.ber,
            "frame_errors": self.frame_errors,
            "mean_decoder_iters": self.decoder_iters / self.frames if self.frames else float("nan"),
        }


def _pool_map(tasks, workers):
    if workers <= 1:
        return [_run_frame_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_frame_task, tasks, chunksize=1))


def run_point(cfg: SimConfig, point: dict, workers: int = 1) -> list[PointResult]:
    """Simulate frames for one sweep point until every receiver has
    ``min_bit_errors`` errors or ``max_frames`` frames.

    A receiver stops at the first frame index where its running error count
    reaches the target, so the outcome is independent of batch size and
    worker count.
    """
    eps = cfg.schedule(point).at(1)
    results = {r: PointResult(receiver=r, point=point, eps=eps) for r in cfg.receivers}
    active = list(cfg.receivers)
    frame = 0
    while active and frame < cfg.max_frames:
        batch = range(frame, min(frame + max(cfg.batch_frames, workers), cfg.max_frames))
        outs = _pool_map([(cfg, point, f, tuple(active)) for f in batch], workers)
        for tr in sorted(outs, key=lambda t: t.frame):
            for r in list(active):
                pr = results[r]
                pr.frames += 1
                pr.bits += tr.bits[r]
                pr.bit_errors += tr.bit_errors[r]
                pr.frame_errors += tr.frame_error[r]
                pr.decoder_iters += tr.decoder_iters[r]
                pr.per_frame_errors.append(tr.bit_errors[r])
                if pr.bit_errors >= cfg.min_bit_errors:
                    active.remove(r)
        frame = batch.stop
    return [results[r] for r in cfg.receivers]


def run_sweep(cfg: SimConfig, workers: int = 1, progress=None) -> list[PointResult]:
    out = []
    for point in cfg.points():
        res = run_point(cfg, point, workers)
        out.extend(res)
        if progress is not None:
            progress(res)
    return out


def to_csv(results, fh=None) -> str:
    buf = fh if fh is not None else io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in results:
        w.writerow(r.row())
    return buf.getvalue() if fh is None else ""


def manifest(cfg: SimConfig, workers: int) -> str:
    lines = [
        f"asyncplnc {__version__}",
        f"config_sha256_16 {cfg.digest()}",
        f"seed {cfg.seed}",
        f"workers {workers}",
        f"python {platform.python_version()}",
        f"numpy {np.__version__}",
        "config " + json.dumps(cfg.to_dict(), sort_keys=True, default=str),
    ]
    return "\n".join(lines) + "\n"


GROUP_STAGES = ("hidden", "channel", "cfo", "symbols")


def paper_op_formulas(n: int, k: int) -> tuple[float, float]:
    """Complex (additions, multiplications) claimed per parameter-group update."""
    lg = np.log2(n)
    return 6 * n * lg + 2 * n + k, 3 * n * lg + 5 * n + k


def op_counters(sizes=(64, 128, 256), cir_length: int = 6, iterations: int = 2,
                cfo_step: str = "phase-aware", seed: int = 0) -> list[dict]:
    """Measure SAGE operation counts for a full allocation at each block size.

    One noisy two-terminal block is drawn per size and ``iterations`` full
    SAGE cycles are run under an :class:`~asyncplnc.linalg.OpCounter`. Only
    the four group stages (hidden signal, channel, CFO, symbols) are kept,
    so the preamble-free set-up transforms and the symbol bootstrap do not
    enter the per-iteration figures. One cycle is two group updates.
    """
    from . import sage

    rows = []
    for n in sizes:
        rng = np.random.default_rng(seed)
        alloc = ofdm.SubcarrierAllocation(np.arange(n), n)
        h = [channel.draw_cir(cir_length, rng).taps for _ in range(2)]
        x = [ofdm.bpsk_map(rng.integers(0, 2, n)) for _ in range(2)]
        with linalg.suspended():
            y = ofdm.mac_signal_model(x[0], x[1], h[0], h[1], -0.1, 0.1)
            y, noise_var = channel.add_awgn(y, 15.0, rng)
        cov = np.diag(channel.power_delay_profile(cir_length)).astype(complex)
        init = sage.ParamEstimate(eps=(0.0, 0.0), h=tuple(h), x=tuple(x))
        with linalg.counting() as counter:
            sage.run_sage(y, init, noise_var, (cov, cov), alloc, iterations=iterations, cfo_step=cfo_step)
        stages = {s: counter.by_stage.get(s, (0, 0)) for s in GROUP_STAGES}
        updates = 2 * iterations
        adds = sum(a for a, _ in stages.values()) / updates
        mults = sum(m for _, m in stages.values()) / updates
        paper_adds, paper_mults = paper_op_formulas(n, alloc.k)
        rows.append({
            "n": n, "k": alloc.k,
            "adds_per_group": adds, "mults_per_group": mults,
            "adds_per_cycle": 2 * adds, "mults_per_cycle": 2 * mults,
            "paper_adds_per_group": paper_adds, "paper_mults_per_group": paper_mults,
            "adds_ratio": adds / paper_adds, "mults_ratio": mults / paper_mults,
            "by_stage": {s: (a / updates, m / updates) for s, (a, m) in stages.items()},
        })
    return rows


def nlogn_slope(rows: list[dict], key: str) -> float:
    """Least-squares slope of ``log(count)`` against ``log(N log2 N)``; 1 means pure N log N growth."""
    n = np.array([r["n"] for r in rows], dtype=float)
    c = np.array([r[key] for r in rows], dtype=float)
    return float(np.polyfit(np.log(n * np.log2(n)), np.log(c), 1)[0])


def complexity_report(rows: list[dict]) -> str:
    lines = ["# SAGE operation counts per parameter-group update (one full cycle = 2 updates)",
             "# FFT convention: N log2 N complex additions, (N/2) log2 N complex multiplications",
             "n,k,adds,paper_adds,adds_ratio,mults,paper_mults,mults_ratio"]
    for r in rows:
        lines.append(
            f"{r['n']},{r['k']},{r['adds_per_group']:.0f},{r['paper_adds_per_group']:.0f},{r['adds_ratio']:.3f},"
            f"{r['mults_per_group']:.0f},{r['paper_mults_per_group']:.0f},{r['mults_ratio']:.3f}"
        )
    if len(rows) > 1:
        lines.append(f"# N log N slope: adds {nlogn_slope(rows, 'adds_per_group'):.3f}, "
                     f"mults {nlogn_slope(rows, 'mults_per_group'):.3f}")
    lines.append("# per-stage (adds, mults) per group update")
    for r in rows:
        parts = ", ".join(f"{s}=({a:.0f}, {m:.0f})" for s, (a, m) in r["by_stage"].items())
        lines.append(f"# n={r['n']}: {parts}")
    return "\n".join(lines) + "\n"
