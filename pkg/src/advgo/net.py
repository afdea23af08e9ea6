"""Small convolutional policy/value network with hand-written gradients.

Trunk: a 3x3 input convolution plus residual blocks (two 3x3 convolutions
each), all ReLU. Four heads:

* policy: 1x1 conv to 2 channels, dense to size*size + 1 logits
* value: 1x1 conv to 1 channel, dense->ReLU->dense, tanh scalar
* ownership: 1x1 conv to 1 channel, tanh per cell
* opponent-move: same shape as the policy head

Everything is float64 numpy; gradients are analytic and are verified against
central finite differences in the test suite. Weight files store float32
tensors (little-endian) with a trailing CRC32, so freshly initialised or
loaded networks round-trip bit-exactly.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .board import BLACK, EMPTY, PASS, WHITE, GameState
from .search import EvalResult
from .symmetry import (SYMMETRY_COUNT, inverse_transform, transform_planes,
                       transform_policy)

INPUT_PLANES = 7
_KOMI_SCALE = 15.0


def encode(state: GameState) -> np.ndarray:
    """Feature planes from the side to move's perspective.

    Planes: own stones, opponent stones, empty, last move, all ones,
    signed komi / 15 (positive when komi favours the mover), and
    consecutive passes / 2 broadcast as constant planes.
    """
    size = state.size
    grid = np.frombuffer(state.grid, dtype=np.uint8).reshape(size, size)
    me = state.to_move
    planes = np.zeros((INPUT_PLANES, size, size))
    planes[0] = grid == me
    planes[1] = grid == (BLACK + WHITE - me)
    planes[2] = grid == EMPTY
    last = state.last_move()
    if last is not None and last[1] != PASS:
        r, c = divmod(last[1], size)
        planes[3, r, c] = 1.0
    planes[4] = 1.0
    komi = state.rules.komi if me == WHITE else -state.rules.komi
    planes[5] = komi / _KOMI_SCALE
    planes[6] = state.consecutive_passes / 2.0
    return planes


# -- layers ------------------------------------------------------------------

def _im2col(x: np.ndarray) -> np.ndarray:
    """(B,C,H,W) -> (B, C*9, H*W) patches for a padded 3x3 convolution."""
    b, c, h, w = x.shape
    xp = np.zeros((b, c, h + 2, w + 2))
    xp[:, :, 1:1 + h, 1:1 + w] = x
    cols = np.empty((b, c, 3, 3, h, w))
    for ki in range(3):
        for kj in range(3):
            cols[:, :, ki, kj] = xp[:, :, ki:ki + h, kj:kj + w]
    return cols.reshape(b, c * 9, h * w)


def _col2im(cols: np.ndarray, shape: tuple) -> np.ndarray:
    b, c, h, w = shape
    xp = np.zeros((b, c, h + 2, w + 2))
    cols = cols.reshape(b, c, 3, 3, h, w)
    for ki in range(3):
        for kj in range(3):
            xp[:, :, ki:ki + h, kj:kj + w] += cols[:, :, ki, kj]
    return xp[:, :, 1:1 + h, 1:1 + w]


def _conv3_forward(x, w, b):
    bsz, _, h, wd = x.shape
    cols = _im2col(x)
    out = np.matmul(w.reshape(w.shape[0], -1)[None], cols)
    out += b[None, :, None]
    return out.reshape(bsz, w.shape[0], h, wd), cols


def _conv3_backward(dout, cols, w, x_shape):
    bsz, o, h, wd = dout.shape
    dflat = dout.reshape(bsz, o, h * wd)
    dw = np.einsum("bop,bkp->ok", dflat, cols).reshape(w.shape)
    db = dflat.sum(axis=(0, 2))
    dcols = np.einsum("ok,bop->bkp", w.reshape(o, -1), dflat)
    return _col2im(dcols, x_shape), dw, db


def _conv1_forward(x, w, b):
    # w: (O, C); pointwise convolution
    out = np.einsum("oc,bchw->bohw", w, x) + b[None, :, None, None]
    return out


def _conv1_backward(dout, x, w):
    dw = np.einsum("bohw,bchw->oc", dout, x)
    db = dout.sum(axis=(0, 2, 3))
    dx = np.einsum("oc,bohw->bchw", w, dout)
    return dx, dw, db


def _masked_log_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):  # non-finite logits surface as nan
        z = np.where(mask, logits, -np.inf)
        zmax = z.max(axis=1, keepdims=True)
        ez = np.exp(z - zmax)
        return z - zmax - np.log(ez.sum(axis=1, keepdims=True))


@dataclass
class LossWeights:
    policy: float = 1.0
    value: float = 1.0
    ownership: float = 0.15
    opponent_move: float = 0.15

    def __post_init__(self):
        for f in (self.policy, self.value, self.ownership, self.opponent_move):
            if f < 0:
                raise ValueError("loss weights must be non-negative")


class Network:
    """Parameter container plus forward/backward passes."""

    FORMAT_MAGIC = b"ADVGONET"
    FORMAT_VERSION = 1

    def __init__(self, board_size: int, channels: int = 16, blocks: int = 2,
                 seed: int = 0, params: dict[str, np.ndarray] | None = None):
        self.board_size = board_size
        self.channels = channels
        self.blocks = blocks
        self.moves = board_size * board_size + 1
        if params is not None:
            self.params = params
        else:
            self.params = self._init_params(seed)

    # Canonical parameter order for serialization and optimizers.
    def param_names(self) -> list[str]:
        names = ["trunk_w", "trunk_b"]
        for i in range(self.blocks):
            names += [f"res{i}_w1", f"res{i}_b1", f"res{i}_w2", f"res{i}_b2"]
        for head in ("pol", "opp"):
            names += [f"{head}_cw", f"{head}_cb", f"{head}_dw", f"{head}_db"]
        names += ["val_cw", "val_cb", "val_d1w", "val_d1b", "val_d2w",
                  "val_d2b", "own_cw", "own_cb"]
        return names

    def _init_params(self, seed: int) -> dict[str, np.ndarray]:
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(entropy=seed, spawn_key=(self.board_size,
                                                            self.channels,
                                                            self.blocks))))
        c, n2 = self.channels, self.board_size ** 2

        def he(shape, fan_in):
            a = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
            return a.astype(np.float32).astype(np.float64)

        p: dict[str, np.ndarray] = {}
        p["trunk_w"] = he((c, INPUT_PLANES, 3, 3), INPUT_PLANES * 9)
        p["trunk_b"] = np.zeros(c)
        for i in range(self.blocks):
            p[f"res{i}_w1"] = he((c, c, 3, 3), c * 9)
            p[f"res{i}_b1"] = np.zeros(c)
            p[f"res{i}_w2"] = he((c, c, 3, 3), c * 9)
            p[f"res{i}_b2"] = np.zeros(c)
        for head in ("pol", "opp"):
            p[f"{head}_cw"] = he((2, c), c)
            p[f"{head}_cb"] = np.zeros(2)
            # Zero-initialised final layers: fresh nets emit uniform policies.
            p[f"{head}_dw"] = np.zeros((self.moves, 2 * n2))
            p[f"{head}_db"] = np.zeros(self.moves)
        p["val_cw"] = he((1, c), c)
        p["val_cb"] = np.zeros(1)
        p["val_d1w"] = he((16, n2), n2)
        p["val_d1b"] = np.zeros(16)
        p["val_d2w"] = np.zeros((1, 16))
        p["val_d2b"] = np.zeros(1)
        p["own_cw"] = np.zeros((1, c))
        p["own_cb"] = np.zeros(1)
        return p

    # -- forward -----------------------------------------------------------

    def _trunk(self, x: np.ndarray, want_cache: bool):
        p = self.params
        cache: list = []
        h, cols = _conv3_forward(x, p["trunk_w"], p["trunk_b"])
        a = np.maximum(h, 0.0)
        if want_cache:
            cache.append((x.shape, cols, h))
        for i in range(self.blocks):
            h1, cols1 = _conv3_forward(a, p[f"res{i}_w1"], p[f"res{i}_b1"])
            a1 = np.maximum(h1, 0.0)
            h2, cols2 = _conv3_forward(a1, p[f"res{i}_w2"], p[f"res{i}_b2"])
            pre = h2 + a
            out = np.maximum(pre, 0.0)
            if want_cache:
                cache.append((a.shape, cols1, h1, cols2, pre))
            a = out
        return a, cache

    def forward(self, planes: np.ndarray, mask: np.ndarray):
        """Batched forward pass.

        planes: (B, INPUT_PLANES, N, N); mask: (B, moves) legality of the
        policy output. Returns dict with policy/opponent-move log-probs,
        value and ownership.
        """
        if planes.ndim != 4 or planes.shape[1] != INPUT_PLANES \
                or planes.shape[2] != self.board_size:
            raise ValueError(f"bad input shape {planes.shape}")
        p = self.params
        bsz = planes.shape[0]
        n2 = self.board_size ** 2
        trunk, _ = self._trunk(planes, want_cache=False)

        ph = np.maximum(_conv1_forward(trunk, p["pol_cw"], p["pol_cb"]), 0.0)
        pol_logits = ph.reshape(bsz, -1) @ p["pol_dw"].T + p["pol_db"]
        oh = np.maximum(_conv1_forward(trunk, p["opp_cw"], p["opp_cb"]), 0.0)
        opp_logits = oh.reshape(bsz, -1) @ p["opp_dw"].T + p["opp_db"]

        vh = np.maximum(_conv1_forward(trunk, p["val_cw"], p["val_cb"]), 0.0)
        v1 = np.maximum(vh.reshape(bsz, n2) @ p["val_d1w"].T + p["val_d1b"], 0.0)
        value = np.tanh(v1 @ p["val_d2w"].T + p["val_d2b"]).reshape(bsz)

        own = np.tanh(_conv1_forward(trunk, p["own_cw"], p["own_cb"]))
        return {
            "policy_logp": _masked_log_softmax(pol_logits, mask),
            "opponent_logp": opp_logits - _logsumexp(opp_logits),
            "value": value,
            "ownership": own.reshape(bsz, n2),
        }

    def evaluate(self, state: GameState) -> EvalResult:
        """Single-position evaluation with legality masking."""
        planes = encode(state)[None]
        mask = legality_mask(state)[None]
        out = self.forward(planes, mask)
        return EvalResult(
            value=float(out["value"][0]),
            policy=np.exp(out["policy_logp"][0]),
            ownership=out["ownership"][0],
            opponent_move=np.exp(out["opponent_logp"][0]),
        )

    # -- loss & gradients ----------------------------------------------------

    def loss_and_gradients(self, batch: "Batch",
                           weights: LossWeights | None = None):
        """Mean loss over a batch plus analytic parameter gradients.

        Returns (loss, grads, parts) where parts holds the unweighted policy,
        value, ownership and opponent-move terms.
        """
        if weights is None:
            weights = LossWeights()
        p = self.params
        x = batch.planes
        bsz = x.shape[0]
        if bsz == 0:
            raise ValueError("empty batch")
        n2 = self.board_size ** 2

        trunk, cache = self._trunk(x, want_cache=True)

        # Heads forward (caching pre-activations for the backward pass).
        ph_pre = _conv1_forward(trunk, p["pol_cw"], p["pol_cb"])
        ph = np.maximum(ph_pre, 0.0)
        ph_flat = ph.reshape(bsz, -1)
        pol_logits = ph_flat @ p["pol_dw"].T + p["pol_db"]
        pol_logp = _masked_log_softmax(pol_logits, batch.legal_mask)

        oh_pre = _conv1_forward(trunk, p["opp_cw"], p["opp_cb"])
        oh = np.maximum(oh_pre, 0.0)
        oh_flat = oh.reshape(bsz, -1)
        opp_logits = oh_flat @ p["opp_dw"].T + p["opp_db"]
        opp_logp = opp_logits - _logsumexp(opp_logits)

        vh_pre = _conv1_forward(trunk, p["val_cw"], p["val_cb"])
        vh = np.maximum(vh_pre, 0.0)
        vh_flat = vh.reshape(bsz, n2)
        v1_pre = vh_flat @ p["val_d1w"].T + p["val_d1b"]
        v1 = np.maximum(v1_pre, 0.0)
        v_pre = v1 @ p["val_d2w"].T + p["val_d2b"]
        value = np.tanh(v_pre).reshape(bsz)

        own_pre = _conv1_forward(trunk, p["own_cw"], p["own_cb"]).reshape(bsz, n2)
        own = np.tanh(own_pre)

        # Loss terms (per-batch means).
        tgt = batch.policy_target
        pol_ce = float(-(tgt * np.where(tgt > 0, pol_logp, 0.0)).sum() / bsz)
        val_mse = float(((value - batch.value_target) ** 2).mean())
        own_mse = float(((own - batch.ownership_target) ** 2).mean())
        has_opp = batch.opponent_target >= 0
        opp_rows = np.flatnonzero(has_opp)
        if opp_rows.size:
            opp_ce = float(-opp_logp[opp_rows,
                                     batch.opponent_target[opp_rows]].sum() / bsz)
        else:
            opp_ce = 0.0
        loss = (weights.policy * pol_ce + weights.value * val_mse
                + weights.ownership * own_mse + weights.opponent_move * opp_ce)
        if not np.isfinite(loss):
            bad = _first_nonfinite(pol_logp, value, own)
            raise FloatingPointError(f"non-finite loss (example {bad})")

        grads = {name: np.zeros_like(p[name]) for name in self.param_names()}

        # Policy head backward: d(CE)/d(logits) = softmax - target.
        probs = np.exp(pol_logp)
        dpol = (probs - tgt) * (weights.policy / bsz)
        dpol[~batch.legal_mask] = 0.0
        grads["pol_dw"] = dpol.T @ ph_flat
        grads["pol_db"] = dpol.sum(axis=0)
        dph = (dpol @ p["pol_dw"]).reshape(ph.shape) * (ph_pre > 0)
        dtrunk, grads["pol_cw"], grads["pol_cb"] = _conv1_backward(
            dph, trunk, p["pol_cw"])

        opp_probs = np.exp(opp_logp)
        dopp = np.zeros_like(opp_probs)
        if opp_rows.size:
            dopp[opp_rows] = opp_probs[opp_rows]
            dopp[opp_rows, batch.opponent_target[opp_rows]] -= 1.0
            dopp *= weights.opponent_move / bsz
        grads["opp_dw"] = dopp.T @ oh_flat
        grads["opp_db"] = dopp.sum(axis=0)
        doh = (dopp @ p["opp_dw"]).reshape(oh.shape) * (oh_pre > 0)
        dt, grads["opp_cw"], grads["opp_cb"] = _conv1_backward(
            doh, trunk, p["opp_cw"])
        dtrunk += dt

        dvalue = 2.0 * (value - batch.value_target) * (weights.value / bsz)
        dv_pre = (dvalue * (1.0 - value ** 2)).reshape(bsz, 1)
        grads["val_d2w"] = dv_pre.T @ v1
        grads["val_d2b"] = dv_pre.sum(axis=0)
        dv1 = (dv_pre @ p["val_d2w"]) * (v1_pre > 0)
        grads["val_d1w"] = dv1.T @ vh_flat
        grads["val_d1b"] = dv1.sum(axis=0)
        dvh = (dv1 @ p["val_d1w"]).reshape(vh.shape) * (vh_pre > 0)
        dt, grads["val_cw"], grads["val_cb"] = _conv1_backward(
            dvh, trunk, p["val_cw"])
        dtrunk += dt

        down = (2.0 * (own - batch.ownership_target)
                * (1.0 - own ** 2) * (weights.ownership / (bsz * n2)))
        down = down.reshape(bsz, 1, self.board_size, self.board_size)
        dt, grads["own_cw"], grads["own_cb"] = _conv1_backward(
            down, trunk, p["own_cw"])
        dtrunk += dt

        # Trunk backward through the residual blocks.
        for i in reversed(range(self.blocks)):
            a_shape, cols1, h1, cols2, pre = cache[i + 1]
            dpre = dtrunk * (pre > 0)
            da1, dw2, db2 = _conv3_backward(dpre, cols2, p[f"res{i}_w2"],
                                            a_shape)
            grads[f"res{i}_w2"], grads[f"res{i}_b2"] = dw2, db2
            da1 *= (h1 > 0)
            da, dw1, db1 = _conv3_backward(da1, cols1, p[f"res{i}_w1"],
                                           a_shape)
            grads[f"res{i}_w1"], grads[f"res{i}_b1"] = dw1, db1
            dtrunk = da + dpre  # skip connection
        x_shape, cols0, h0 = cache[0]
        dtrunk = dtrunk * (h0 > 0)
        _, grads["trunk_w"], grads["trunk_b"] = _conv3_backward(
            dtrunk, cols0, p["trunk_w"], x_shape)

        parts = {"policy": pol_ce, "value": val_mse, "ownership": own_mse,
                 "opponent_move": opp_ce}
        return loss, grads, parts

    def clone(self) -> "Network":
        return Network(self.board_size, self.channels, self.blocks,
                       params={k: v.copy() for k, v in self.params.items()})


def _logsumexp(z: np.ndarray) -> np.ndarray:
    zmax = z.max(axis=1, keepdims=True)
    return zmax + np.log(np.exp(z - zmax).sum(axis=1, keepdims=True))


def _first_nonfinite(*arrays) -> int:
    for a in arrays:
        bad = ~np.isfinite(a)
        if bad.any():
            return int(np.argwhere(bad)[0][0])
    return -1


def legality_mask(state: GameState) -> np.ndarray:
    size = state.size
    mask = np.zeros(size * size + 1, dtype=bool)
    for v in state.legal_moves():
        mask[size * size if v == PASS else v] = True
    return mask


@dataclass
class Batch:
    planes: np.ndarray            # (B, INPUT_PLANES, N, N)
    legal_mask: np.ndarray        # (B, moves) bool
    policy_target: np.ndarray     # (B, moves)
    value_target: np.ndarray      # (B,)
    ownership_target: np.ndarray  # (B, N*N)
    opponent_target: np.ndarray   # (B,) move index or -1 when absent


class SgdMomentum:
    """Plain SGD with momentum and an optional single 10x decay step."""

    def __init__(self, lr: float, momentum: float = 0.9,
                 decay_after: int | None = None):
        self.lr = lr
        self.momentum = momentum
        self.decay_after = decay_after
        self.steps = 0
        self.velocity: dict[str, np.ndarray] = {}

    def step(self, net: Network, grads: dict[str, np.ndarray]):
        lr = self.lr
        if self.decay_after is not None and self.steps >= self.decay_after:
            lr = self.lr / 10.0
        for name in net.param_names():
            v = self.velocity.get(name)
            if v is None:
                v = np.zeros_like(net.params[name])
                self.velocity[name] = v
            v *= self.momentum
            v += grads[name]
            net.params[name] -= lr * v
        self.steps += 1


def sgd_step(net: Network, grads: dict[str, np.ndarray], lr: float,
             momentum: float = 0.9,
             optimizer: SgdMomentum | None = None) -> SgdMomentum:
    """One optimizer step; pass the returned optimizer back in to keep
    momentum state across calls."""
    if optimizer is None:
        optimizer = SgdMomentum(lr, momentum)
    optimizer.lr = lr
    optimizer.step(net, grads)
    return optimizer


# -- serialization -----------------------------------------------------------

class WeightsFormatError(Exception):
    pass


def save(net: Network, path: str):
    payload = bytearray()
    payload += struct.pack("<IIIII", Network.FORMAT_VERSION, net.board_size,
                           net.channels, net.blocks, INPUT_PLANES)
    names = net.param_names()
    payload += struct.pack("<I", len(names))
    for name in names:
        arr = net.params[name]
        raw = name.encode()
        payload += struct.pack("<H", len(raw)) + raw
        payload += struct.pack("<B", arr.ndim)
        payload += struct.pack(f"<{arr.ndim}I", *arr.shape)
        payload += arr.astype("<f4").tobytes()
    crc = zlib.crc32(bytes(payload))
    with open(path, "wb") as fh:
        fh.write(Network.FORMAT_MAGIC)
        fh.write(payload)
        fh.write(struct.pack("<I", crc))


def load(path: str) -> Network:
    with open(path, "rb") as fh:
        blob = fh.read()
    magic = blob[:len(Network.FORMAT_MAGIC)]
    if magic != Network.FORMAT_MAGIC:
        raise WeightsFormatError(f"bad magic {magic!r}")
    if len(blob) < len(magic) + 4:
        raise WeightsFormatError("truncated file")
    payload, (crc,) = blob[len(magic):-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(payload) != crc:
        raise WeightsFormatError("checksum mismatch")
    off = 0

    def take(fmt):
        nonlocal off
        vals = struct.unpack_from(fmt, payload, off)
        off += struct.calcsize(fmt)
        return vals

    version, board_size, channels, blocks, planes = take("<IIIII")
    if version != Network.FORMAT_VERSION:
        raise WeightsFormatError(f"unsupported format version {version}")
    if planes != INPUT_PLANES:
        raise WeightsFormatError(f"unsupported input plane count {planes}")
    (count,) = take("<I")
    params: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = take("<H")
        name = payload[off:off + nlen].decode()
        off += nlen
        (ndim,) = take("<B")
        shape = take(f"<{ndim}I")
        n = int(np.prod(shape)) if ndim else 1
        end = off + 4 * n
        if end > len(payload):
            raise WeightsFormatError("truncated tensor data")
        arr = np.frombuffer(payload[off:end], dtype="<f4").astype(np.float64)
        off = end
        params[name] = arr.reshape(shape)
    net = Network(board_size, channels, blocks, params=params)
    missing = set(net.param_names()) - set(params)
    if missing:
        raise WeightsFormatError(f"missing tensors: {sorted(missing)}")
    return net


class NetEvaluator:
    """Adapts a Network to the search evaluator interface."""

    def __init__(self, net: Network):
        self.net = net

    def __call__(self, state: GameState) -> EvalResult:
        return self.net.evaluate(state)

    def eval_symmetry_averaged(self, state: GameState) -> EvalResult:
        size = state.size
        planes = encode(state)
        stack = np.stack([transform_planes(planes, size, k)
                          for k in range(SYMMETRY_COUNT)])
        mask = legality_mask(state)
        masks = np.stack([np.append(
            transform_policy(mask.astype(np.float64), size, k)[:-1] > 0.5,
            mask[-1]) for k in range(SYMMETRY_COUNT)])
        out = self.net.forward(stack, masks)
        pols = np.exp(out["policy_logp"])
        back = [transform_policy(pols[k], size, inverse_transform(k))
                for k in range(SYMMETRY_COUNT)]
        policy = np.mean(back, axis=0)
        policy[~mask] = 0.0
        total = policy.sum()
        if total > 0:
            policy /= total
        return EvalResult(value=float(out["value"].mean()), policy=policy)


def symmetry_averaged_eval(evaluator, state: GameState) -> EvalResult:
    """Average an evaluator over the 8 board symmetries.

    Network evaluators expose a fast path; any other evaluator is queried on
    transformed replays of the position.
    """
    fast = getattr(evaluator, "eval_symmetry_averaged", None)
    if fast is not None:
        return fast(state)
    from .board import new_game
    size = state.size
    policies = []
    values = []
    for k in range(SYMMETRY_COUNT):
        st = new_game(state.rules)
        from .symmetry import transform_vertex
        for _, v in state.move_history:
            st = st.play(transform_vertex(v, size, k))
        res = evaluator(st)
        policies.append(transform_policy(res.policy, size,
                                         inverse_transform(k)))
        values.append(res.value)
    policy = np.mean(policies, axis=0)
    total = policy.sum()
    if total > 0:
        policy /= total
    return EvalResult(value=float(np.mean(values)), policy=policy)
