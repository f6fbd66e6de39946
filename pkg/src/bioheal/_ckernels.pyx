# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled cell kernels; see ``_pykernels`` for the reference semantics."""

DEF WORD_MASK = 0xFFFF

cdef enum:
    NOT = 0
    AND = 1
    OR = 2
    ADD = 3
    SUB = 4
    MUL = 5
    CMP_GE = 6
    MUX2 = 7


cdef inline long _comb(int op, long a, long b, long c) except -1:
    if op == NOT:
        return a ^ 1
    elif op == AND:
        return a & b
    elif op == OR:
        return a | b
    elif op == ADD:
        return (a + b) & WORD_MASK
    elif op == SUB:
        return (a - b) & WORD_MASK
    elif op == MUL:
        return (a * b) & WORD_MASK
    elif op == CMP_GE:
        return 1 if a >= b else 0
    elif op == MUX2:
        return b if c else a
    raise ValueError(f"not a combinational opcode: {op}")


def comb_eval(int op, long a, long b, long c):
    return _comb(op, a, b, c)


def vote3(long r0, long r1, long r2):
    if r0 == r1:
        return r0, (0 if r2 == r0 else 4)
    if r0 == r2:
        return r0, 2
    if r1 == r2:
        return r1, 1
    return r0, 7


def apply_stuck(long value, long and_mask, long or_mask):
    return (value & and_mask) | or_mask


def fire_pair(int op, long a, long b, long c, long and0, long or0, long and1, long or1):
    cdef long v = _comb(op, a, b, c)
    return (v & and0) | or0, (v & and1) | or1
