"""Pure-Python cell kernels.

Mirror of ``_ckernels.pyx``; both modules must stay bit-identical.
Opcode integers follow ``bioheal.blocks.Op``.
"""

WORD_MASK = 0xFFFF

NOT, AND, OR, ADD, SUB, MUL, CMP_GE, MUX2 = range(8)


def comb_eval(op, a, b, c):
    """Evaluate a combinational opcode on 16-bit words (``c`` is the MUX select)."""
    if op == NOT:
        return a ^ 1
    if op == AND:
        return a & b
    if op == OR:
        return a | b
    if op == ADD:
        return (a + b) & WORD_MASK
    if op == SUB:
        return (a - b) & WORD_MASK
    if op == MUL:
        return (a * b) & WORD_MASK
    if op == CMP_GE:
        return 1 if a >= b else 0
    if op == MUX2:
        return b if c else a
    raise ValueError(f"not a combinational opcode: {op}")


def vote3(r0, r1, r2):
    """2-of-3 vote.

    Returns ``(value, flags)``; bit i of ``flags`` is set when replica i
    disagrees with the majority.  ``flags == 7`` means no two replicas agree,
    in which case ``value`` is meaningless.
    """
    if r0 == r1:
        return r0, (0 if r2 == r0 else 4)
    if r0 == r2:
        return r0, 2
    if r1 == r2:
        return r1, 1
    return r0, 7


def apply_stuck(value, and_mask, or_mask):
    return (value & and_mask) | or_mask


def fire_pair(op, a, b, c, and0, or0, and1, or1):
    """Evaluate one opcode on both GFB copies, each behind its own stuck-at masks."""
    v = comb_eval(op, a, b, c)
    return (v & and0) | or0, (v & and1) | or1
