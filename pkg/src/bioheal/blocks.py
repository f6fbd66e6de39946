"""IEC 61131-3 style operation library executed inside each generic function block."""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from . import kernels

WORD_BITS = 16
WORD_MASK = (1 << WORD_BITS) - 1
ACC_MIN = -(1 << 31)
ACC_MAX = (1 << 31) - 1


class Op(enum.IntEnum):
    NOT = 0
    AND = 1
    OR = 2
    ADD = 3
    SUB = 4
    MUL = 5
    CMP_GE = 6
    MUX2 = 7
    DELAY1 = 8
    PI = 9

    @property
    def arity(self) -> int:
        return ARITY[self]

    @property
    def combinational(self) -> bool:
        return self not in (Op.DELAY1, Op.PI)

    @property
    def boolean(self) -> bool:
        return self in (Op.NOT, Op.AND, Op.OR)


# MUX2 takes (a, b, sel): two data inputs plus the select line.
ARITY = {
    Op.NOT: 1,
    Op.AND: 2,
    Op.OR: 2,
    Op.ADD: 2,
    Op.SUB: 2,
    Op.MUL: 2,
    Op.CMP_GE: 2,
    Op.MUX2: 3,
    Op.DELAY1: 1,
    Op.PI: 1,
}


class BlockArityError(ValueError):
    pass


@dataclass(frozen=True)
class BlockState:
    delay_reg: int = 0
    pi_accum: int = 0


@dataclass(frozen=True)
class PiGains:
    kp_num: int = 1
    kp_den: int = 1
    ki_num: int = 0
    ki_den: int = 1

    def __post_init__(self):
        if self.kp_den <= 0 or self.ki_den <= 0:
            raise ValueError("PI gain denominators must be positive")
        if self.kp_num < 0 or self.ki_num < 0:
            raise ValueError("PI gains must be non-negative")


DEFAULT_GAINS = PiGains()


def to_signed(word: int) -> int:
    """Interpret a 16-bit word as two's complement."""
    return word - (1 << WORD_BITS) if word & 0x8000 else word


def _floor_ratio(num: int, den: int) -> int:
    return num // den


def eval_block(op: Op, inputs, state: BlockState = BlockState(), gains: PiGains = DEFAULT_GAINS):
    """Run one firing of ``op``; returns ``(output_word, next_state)``.

    Combinational opcodes never touch ``state``.  DELAY1 emits the previous
    register value and stores the new input.  PI treats its input as a signed
    error, integrates it with forward Euler into a saturating 32-bit
    accumulator, and clamps ``kp*e + ki*sum(e)`` into ``[0, 65535]``.
    """
    op = Op(op)
    if len(inputs) != op.arity:
        raise BlockArityError(f"{op.name} expects {op.arity} inputs, got {len(inputs)}")
    if op.combinational:
        a = inputs[0]
        b = inputs[1] if op.arity > 1 else 0
        c = inputs[2] if op.arity > 2 else 0
        return kernels.comb_eval(int(op), a, b, c), state
    if op is Op.DELAY1:
        return state.delay_reg, replace(state, delay_reg=inputs[0] & WORD_MASK)
    # PI
    err = to_signed(inputs[0] & WORD_MASK)
    acc = min(ACC_MAX, max(ACC_MIN, state.pi_accum + err))
    u = _floor_ratio(gains.kp_num * err, gains.kp_den) + _floor_ratio(gains.ki_num * acc, gains.ki_den)
    return min(WORD_MASK, max(0, u)), replace(state, pi_accum=acc)
