"""Bridge session: one simulator, one operator, one recording buffer.

Sans-io by design: handle() and tick() return the outbound messages and
the transport layer owns sockets and timing. That keeps the protocol
logic deterministic, so a recorded control stream replayed tick-aligned
against the same seed reproduces the saved episode byte for byte.
"""
import base64
import dataclasses
import io
from pathlib import Path
from typing import List, Optional

import numpy as np
from PIL import Image

from ..datakit import EpisodeWriter, FilterConfig, filter_episode
from ..evalkit import running_metrics
from ..simcore import ControlIncrement, Outcome, Simulator
from .protocol import PROTOCOL_VERSION, ProtocolError, parse_client_message


def png_b64(img: np.ndarray) -> str:
    # optimize keeps the noisy camera frame under 10 KiB on the wire
    buf = io.BytesIO()
    Image.fromarray(np.asarray(img, dtype=np.uint8), mode="L").save(
        buf, format="PNG", optimize=True)
    return base64.b64encode(buf.getvalue()).decode("ascii")


class Session:
    """Protocol state machine around a private Simulator.

    Time only advances through tick(); between ticks the session just
    accumulates the latest control (last-writer-wins). After a terminal
    outcome the simulator freezes until a reset, so late controls cannot
    corrupt a finished run.
    """

    def __init__(self, geom, tube, cfg, out_root, session_id: str = "s0",
                 seed: int = 0, filter_config: Optional[FilterConfig] = None):
        self.sim = Simulator(geom, tube, cfg)
        self.session_id = session_id
        self.seed = int(seed)
        self.out_root = Path(out_root)
        self.fc = filter_config or FilterConfig()
        self.dt = float(cfg.dt)
        self._seq = 0
        self._client_seq = -1
        self._pending: Optional[ControlIncrement] = None
        self._n_saved = 0
        self._reset_runtime(self.seed)

    # ------------------------------------------------------------- state

    def _reset_runtime(self, seed: int):
        self.state = self.sim.reset(seed)
        self.run_seed = int(seed)
        self.tick_index = 0
        self.prev_ee = np.zeros(3)
        self.prev_ch = np.zeros(5)
        self._ts = [0.0]
        self._ch_rows = [np.zeros(5)]
        self.outcome = Outcome("in_progress")
        self.metrics = None
        self.recording = False
        self._rows: List[tuple] = []
        self._rec_outcome: Optional[Outcome] = None
        self._rec_metrics = None
        self._frame = self.sim.render_camera1(self.state)
        self._side = self.sim.render_side(self.state)

    def _next_seq(self) -> int:
        n = self._seq
        self._seq += 1
        return n

    def _error(self, message: str) -> dict:
        return {"type": "error", "seq": self._next_seq(), "message": message}

    def _forces(self) -> dict:
        ch = self.prev_ch
        ee = self.prev_ee
        return {"fx": ch[0], "fy": ch[1], "fz": ch[2],
                "f1": ch[3], "f2": ch[4],
                "fx_ee": ee[0], "fy_ee": ee[1], "fz_ee": ee[2]}

    def _state_msg(self) -> dict:
        return {"type": "state", "seq": self._next_seq(),
                "tick": self.tick_index,
                "t": float(self.state.elapsed),
                "pose": [float(v) for v in self.state.ee_pose],
                "forces": {k: float(v) for k, v in self._forces().items()},
                "frame": png_b64(self._frame),
                "side": png_b64(self._side),
                "outcome": {"status": self.outcome.status,
                            "reason": self.outcome.reason},
                "recording": self.recording}

    def hello(self) -> List[dict]:
        cfg = self.sim.cfg
        head = {"type": "hello", "seq": self._next_seq(),
                "protocol": PROTOCOL_VERSION,
                "session": self.session_id,
                "seed": self.seed,
                "dt": self.dt,
                "filter": dataclasses.asdict(self.fc),
                "limits": {"max_step_xy": cfg.max_step_xy,
                           "max_step_theta": cfg.max_step_theta},
                "time_limit": cfg.time_limit}
        return [head, self._state_msg()]

    # ----------------------------------------------------------- inbound

    def handle(self, text) -> List[dict]:
        try:
            msg = parse_client_message(text)
        except ProtocolError as e:
            return [self._error(str(e))]
        if msg["seq"] <= self._client_seq:
            return [self._error(f"stale sequence number {msg['seq']}")]
        self._client_seq = msg["seq"]
        kind = msg["type"]
        if kind == "control":
            u = ControlIncrement(float(msg["dx"]), float(msg["dz"]),
                                 float(msg["dtheta"]))
            self._pending = u.clamped(self.sim.cfg)
            return []
        if kind == "reset":
            self._reset_runtime(int(msg.get("seed", self.seed)))
            self._pending = None
            return [self._state_msg()]
        return self._record(msg)

    def _record(self, msg: dict) -> List[dict]:
        cmd = msg["cmd"]
        if cmd == "start":
            if self.recording:
                return [self._error("already recording")]
            self._reset_runtime(int(msg.get("seed", self.seed)))
            self._pending = None
            self.recording = True
            return [self._state_msg()]
        if cmd == "stop":
            if not self.recording:
                return [self._error("not recording")]
            self.recording = False
            if self._rows:
                # closing row: terminal state, zero command; snapshot the
                # metrics now, free driving after stop must not leak in
                self._rows.append((self.tick_index * self.dt,
                                   self.state.ee_pose.copy(),
                                   self.prev_ee.copy(), self.prev_ch.copy(),
                                   np.zeros(3), self._frame.copy()))
                self._rec_outcome = (self.outcome if self.outcome.terminal
                                     else Outcome("failure", "aborted"))
                self._rec_metrics = self.metrics
            return [self._state_msg()]
        if cmd == "discard":
            self._rows = []
            self._rec_outcome = None
            self._rec_metrics = None
            return []
        return self._save()

    def _save(self) -> List[dict]:
        if self.recording:
            return [self._error("stop recording before saving")]
        if not self._rows:
            return [self._error("nothing recorded")]
        dest = self.out_root / f"ep{self._n_saved:03d}"
        writer = EpisodeWriter(dest, seed=self.run_seed, operator="human",
                               dt=self.dt)
        for row in self._rows:
            writer.append(*row)
        out = self._rec_outcome
        writer.finalize(out.status, out.reason or "")
        rec_metrics = self._rec_metrics
        self._n_saved += 1
        self._rows = []
        self._rec_outcome = None
        self._rec_metrics = None
        msgs = [{"type": "saved", "seq": self._next_seq(), "path": str(dest)}]
        for mode in ("safety", "training"):
            v = filter_episode(rec_metrics, self.fc, mode=mode)
            msgs.append({"type": "verdict", "seq": self._next_seq(),
                         "mode": v.mode, "accept": v.accepted,
                         "reasons": list(v.reasons)})
        return msgs

    # -------------------------------------------------------------- tick

    def tick(self) -> List[dict]:
        if self.outcome.terminal:
            # frozen: stream the final state until a reset
            return [self._state_msg()]
        u = self._pending or ControlIncrement()
        self._pending = None
        action = u.as_array()
        if self.recording:
            self._rows.append((self.tick_index * self.dt,
                               self.state.ee_pose.copy(),
                               self.prev_ee.copy(), self.prev_ch.copy(),
                               action.copy(), self._frame.copy()))
        self.state, sample = self.sim.step(self.state, u)
        self.tick_index += 1
        self.prev_ee = np.array([sample.fx_ee, sample.fy_ee, sample.fz_ee])
        self.prev_ch = sample.channels()
        self._ts.append(self.tick_index * self.dt)
        self._ch_rows.append(self.prev_ch)
        self.metrics = running_metrics(self._ts, self._ch_rows,
                                       self.sim.cfg.impulse_threshold)
        self.outcome = self.sim.check_outcome(self.state, self.metrics)
        self._frame = self.sim.render_camera1(self.state)
        self._side = self.sim.render_side(self.state)
        return [self._state_msg()]
