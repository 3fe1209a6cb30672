"""Block-encodings of arbitrary matrices.

Two constructions behind one interface: an exact one-ancilla unitary
dilation for accuracy experiments, and a FABLE-style compressed
uniformly-controlled-rotation circuit for gate-count reporting. Both
satisfy the contract that the top-left (all ancillas |0>) block of the
unitary equals ``A / alpha``.

Qubit convention: qubit 0 is the most significant tensor factor, ancilla
qubits come first, so basis index = ancilla_bits * 2^n + data_bits and
the encoded block is literally the top-left submatrix.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .numerics import as_matrix, check_unitary, svd

__all__ = [
    "BlockEncoding",
    "Circuit",
    "Gate",
    "dilation_encoding",
    "fable_encoding",
    "compile_circuit",
    "projector_phase_operator",
]

_GATE_ARITY = {"ry": 1, "rz": 1, "h": 1, "cnot": 2, "swap": 2, "controlled-ry": 2}
_ROTATION_KINDS = {"ry", "rz", "controlled-ry"}


@dataclass(frozen=True)
class Gate:
    """One circuit element; ``qubits`` lists controls before targets."""

    kind: str
    qubits: tuple[int, ...]
    angle: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if self.kind in _GATE_ARITY:
            if len(self.qubits) != _GATE_ARITY[self.kind]:
                raise ValueError(f"{self.kind} gate expects {_GATE_ARITY[self.kind]} qubits")
        elif self.kind == "multi-controlled-x":
            if len(self.qubits) < 2:
                raise ValueError("multi-controlled-x needs >= 1 control plus a target")
        else:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if (self.kind in _ROTATION_KINDS) != (self.angle is not None):
            raise ValueError(f"gate {self.kind} angle mismatch")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError("gate qubit indices must be distinct")


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list; the first gate acts first on states."""

    num_qubits: int
    gates: tuple[Gate, ...]

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if any(q < 0 or q >= self.num_qubits for q in g.qubits):
                raise ValueError(f"gate {g} addresses a qubit outside 0..{self.num_qubits - 1}")

    @property
    def gate_count(self) -> int:
        return len(self.gates)

    def to_json(self) -> str:
        return json.dumps(
            {
                "num_qubits": self.num_qubits,
                "gates": [
                    {"kind": g.kind, "qubits": list(g.qubits), "angle": g.angle}
                    for g in self.gates
                ],
            }
        )

    @classmethod
    def from_json(cls, payload: str) -> "Circuit":
        raw = json.loads(payload)
        gates = tuple(Gate(g["kind"], tuple(g["qubits"]), g.get("angle")) for g in raw["gates"])
        return cls(raw["num_qubits"], gates)


@dataclass(frozen=True)
class BlockEncoding:
    """Unitary U with contract ``block(U) = A / alpha``.

    Both projectors select the ancilla-zero subspace; with the ancillas
    as the most significant qubits that subspace is the leading 2^n
    basis states.
    """

    unitary: np.ndarray
    data_qubits: int
    ancilla_qubits: int
    alpha: float
    tolerance: float = 1e-11  # bound on ||block - A/alpha||
    projector_left: str = "ancilla-zero"
    projector_right: str = "ancilla-zero"

    def __post_init__(self):
        u = as_matrix(self.unitary)
        dim = 2 ** (self.data_qubits + self.ancilla_qubits)
        if u.shape != (dim, dim):
            raise ValueError(f"unitary shape {u.shape} inconsistent with qubit counts")
        if self.alpha < 1.0 - 1e-12:
            raise ValueError("alpha must be >= 1")
        check_unitary(u, 1e-11)
        object.__setattr__(self, "unitary", u)

    @property
    def block_dim(self) -> int:
        return 2**self.data_qubits

    def block(self) -> np.ndarray:
        """Top-left data block, equal to the encoded matrix over alpha."""
        n = self.block_dim
        return self.unitary[:n, :n]

    def projector(self) -> np.ndarray:
        dim = self.unitary.shape[0]
        diag = np.zeros(dim)
        diag[: self.block_dim] = 1.0
        return np.diag(diag)


def _require_power_of_two(n: int, what: str) -> int:
    if n < 1 or n & (n - 1) != 0:
        raise ValueError(f"{what} must be a power of two, got {n}")
    return n.bit_length() - 1


def dilation_encoding(a, alpha: float = 1.0) -> BlockEncoding:
    """Exact one-ancilla dilation of a square matrix with norm <= 1.

    U = [[A, sqrt(I - A A^H)], [sqrt(I - A^H A), -A^H]], with the matrix
    square roots taken through the SVD of A and 1 - sigma^2 clamped at
    zero when it dips within 1e-14 below. Callers holding a matrix with
    norm > 1 pre-scale it and record the scale through ``alpha``.
    """
    a = as_matrix(a).astype(complex)
    if a.shape[0] != a.shape[1]:
        raise ValueError("dilation_encoding requires a square matrix")
    n_qubits = _require_power_of_two(a.shape[0], "matrix dimension")
    fac = svd(a)
    if fac.singular_values[0] > 1.0 + 1e-9:
        raise ValueError(
            f"pre-scale required: spectral norm {fac.singular_values[0]} exceeds 1"
        )
    gap = 1.0 - fac.singular_values**2
    if np.any(gap < -1e-14):
        raise ValueError("singular values exceed 1 beyond the clamping guard")
    root = np.sqrt(np.maximum(gap, 0.0))
    top_right = (fac.u * root) @ fac.u.conj().T
    bottom_left = (fac.v * root) @ fac.v.conj().T
    u = np.block([[a, top_right], [bottom_left, -a.conj().T]])
    return BlockEncoding(unitary=u, data_qubits=n_qubits, ancilla_qubits=1, alpha=alpha)


def _gray(k: int) -> int:
    return k ^ (k >> 1)


def _walsh_gray_angles(theta: np.ndarray) -> np.ndarray:
    """theta_hat[k] = 2^-m sum_c (-1)^{popcount(gray(k) & c)} theta[c]."""
    hat = theta.astype(float).copy()
    step = 1
    while step < hat.size:
        for start in range(0, hat.size, 2 * step):
            lo = hat[start : start + step].copy()
            hi = hat[start + step : start + 2 * step].copy()
            hat[start : start + step] = lo + hi
            hat[start + step : start + 2 * step] = lo - hi
        step *= 2
    hat /= hat.size
    order = np.fromiter((_gray(k) for k in range(hat.size)), dtype=int)
    return hat[order]


def fable_encoding(a, threshold: float = 0.0) -> tuple[BlockEncoding, Circuit, int]:
    """FABLE-style block-encoding of a real matrix with |entries| <= 1.

    Rotation angles arccos(a_ij) are Gray-code sequenced through a
    uniformly controlled Ry on one ancilla; Walsh-Hadamard-transformed
    angles below ``threshold`` are dropped together with the controls
    they would have carried, and the dropped coefficient mass is
    reported as the block error bound. alpha = 2^n.

    Returns ``(encoding, circuit, gate_count)``.
    """
    a = as_matrix(a)
    if np.iscomplexobj(a) and np.any(a.imag != 0.0):
        raise ValueError("fable_encoding requires a real-valued matrix")
    a = a.real.astype(float)
    if a.shape[0] != a.shape[1]:
        raise ValueError("fable_encoding requires a square matrix")
    n = _require_power_of_two(a.shape[0], "matrix dimension")
    if np.any(np.abs(a) > 1.0 + 1e-12):
        raise ValueError("entries must lie in [-1, 1]")
    if threshold < 0.0:
        raise ValueError("threshold must be >= 0")

    m = 2 * n  # control bits: data index j (low), row index i (high)
    theta = 2.0 * np.arccos(np.clip(a, -1.0, 1.0)).reshape(-1)
    hat = _walsh_gray_angles(theta)

    num_qubits = 2 * n + 1
    gates: list[Gate] = [Gate("h", (q,)) for q in range(1, n + 1)]

    def control_qubit(bit: int) -> int:
        # control value bit b (0 = least significant) lives on qubit 2n - b
        return 2 * n - bit

    pending = 0
    dropped_mass = 0.0
    for k in range(2**m):
        if abs(hat[k]) < threshold:
            dropped_mass += abs(hat[k])
        else:
            bit = 0
            while pending:
                if pending & 1:
                    gates.append(Gate("cnot", (control_qubit(bit), 0)))
                pending >>= 1
                bit += 1
            gates.append(Gate("ry", (0,), float(hat[k])))
        flip = _gray(k) ^ _gray((k + 1) % 2**m)
        pending ^= flip
    bit = 0
    while pending:
        if pending & 1:
            gates.append(Gate("cnot", (control_qubit(bit), 0)))
        pending >>= 1
        bit += 1

    for t in range(n):
        gates.append(Gate("swap", (1 + t, n + 1 + t)))
    gates.extend(Gate("h", (q,)) for q in range(1, n + 1))

    circuit = Circuit(num_qubits, tuple(gates))
    unitary = compile_circuit(circuit)
    eps_thresh = dropped_mass / 2.0
    encoding = BlockEncoding(
        unitary=unitary,
        data_qubits=n,
        ancilla_qubits=n + 1,
        alpha=float(2**n),
        tolerance=max(eps_thresh, 1e-10),
    )
    return encoding, circuit, circuit.gate_count


def _gate_matrix(gate: Gate) -> np.ndarray:
    if gate.kind == "ry":
        c, s = math.cos(gate.angle / 2.0), math.sin(gate.angle / 2.0)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if gate.kind == "rz":
        e = np.exp(-0.5j * gate.angle)
        return np.array([[e, 0], [0, np.conj(e)]], dtype=complex)
    if gate.kind == "h":
        return np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2.0)
    if gate.kind == "cnot":
        return np.array(
            [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
        )
    if gate.kind == "swap":
        return np.array(
            [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
        )
    if gate.kind == "controlled-ry":
        out = np.eye(4, dtype=complex)
        out[2:, 2:] = _gate_matrix(Gate("ry", (0,), gate.angle))
        return out
    if gate.kind == "multi-controlled-x":
        k = len(gate.qubits)
        out = np.eye(2**k, dtype=complex)
        out[-2:, -2:] = np.array([[0, 1], [1, 0]], dtype=complex)
        return out
    raise ValueError(f"unknown gate kind {gate.kind!r}")


def _apply_gate(state: np.ndarray, gate: Gate, num_qubits: int) -> np.ndarray:
    """Apply ``gate`` to every column of ``state`` (dim x batch)."""
    batch = state.shape[1]
    k = len(gate.qubits)
    tensor = state.reshape((2,) * num_qubits + (batch,))
    moved = np.moveaxis(tensor, gate.qubits, range(k))
    shaped = moved.reshape(2**k, -1)
    shaped = _gate_matrix(gate) @ shaped
    moved = shaped.reshape((2,) * k + moved.shape[k:])
    tensor = np.moveaxis(moved, range(k), gate.qubits)
    return tensor.reshape(2**num_qubits, batch)


def compile_circuit(circuit: Circuit) -> np.ndarray:
    """Dense unitary of the circuit (gates applied in list order)."""
    dim = 2**circuit.num_qubits
    state = np.eye(dim, dtype=complex)
    for gate in circuit.gates:
        state = _apply_gate(state, gate, circuit.num_qubits)
    check_unitary(state, 1e-11)
    return state


def projector_phase_operator(phi: float, which: str, be: BlockEncoding) -> np.ndarray:
    """The diagonal operator e^{i phi (2 Pi - I)} for the encoding's
    ancilla-zero projector (``which`` in {"left", "right"}; both
    projectors coincide for these encodings)."""
    if which not in ("left", "right"):
        raise ValueError(f"which must be 'left' or 'right', got {which!r}")
    dim = be.unitary.shape[0]
    diag = np.full(dim, np.exp(-1j * phi), dtype=complex)
    diag[: be.block_dim] = np.exp(1j * phi)
    return np.diag(diag)
