"""Threaded websocket front end: one Session per connection.

Each connection gets its own simulator seeded base_seed + index, so
concurrent operators cannot interact. The handler thread alternates
between draining client messages and emitting one StateFrame per dt
(20 Hz at the default 0.05 s tick).
"""
import itertools
import threading
import time
from pathlib import Path
from typing import Optional

from websockets.exceptions import ConnectionClosed
from websockets.sync.server import serve as ws_serve

from ..datakit import FilterConfig
from ..simcore import load_sim_bundle
from .protocol import encode
from .session import Session


class BridgeServer:
    def __init__(self, host: str = "127.0.0.1", port: int = 0,
                 bundle=None, out_root="teleop_episodes", base_seed: int = 0,
                 filter_config: Optional[FilterConfig] = None):
        geom, tube, cfg = bundle if bundle is not None else load_sim_bundle()
        self.geom, self.tube, self.cfg = geom, tube, cfg
        self.host = host
        self.port = port
        self.out_root = Path(out_root)
        self.base_seed = int(base_seed)
        self.fc = filter_config
        self._counter = itertools.count()
        self._server = None
        self._thread = None

    def _handle(self, ws):
        idx = next(self._counter)
        name = f"session{idx:02d}"
        sess = Session(self.geom, self.tube, self.cfg,
                       out_root=self.out_root / name, session_id=name,
                       seed=self.base_seed + idx, filter_config=self.fc)
        try:
            for m in sess.hello():
                ws.send(encode(m))
            deadline = time.monotonic() + sess.dt
            while True:
                wait = deadline - time.monotonic()
                if wait > 0:
                    try:
                        text = ws.recv(timeout=wait)
                    except TimeoutError:
                        text = None
                    if text is not None:
                        for m in sess.handle(text):
                            ws.send(encode(m))
                        continue
                deadline += sess.dt
                if deadline < time.monotonic():    # fell behind, drop ticks
                    deadline = time.monotonic() + sess.dt
                for m in sess.tick():
                    ws.send(encode(m))
        except ConnectionClosed:
            return

    # ---------------------------------------------------------- lifecycle

    def start(self) -> "BridgeServer":
        """Bind and serve on a background thread; returns once bound."""
        self._server = ws_serve(self._handle, self.host, self.port)
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        daemon=True)
        self._thread.start()
        return self

    @property
    def address(self) -> str:
        host, port = self._server.socket.getsockname()[:2]
        return f"ws://{host}:{port}"

    def stop(self):
        if self._server is not None:
            self._server.shutdown()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def serve_forever(self):
        """Blocking entry point used by the command line."""
        with ws_serve(self._handle, self.host, self.port) as server:
            self._server = server
            server.serve_forever()
