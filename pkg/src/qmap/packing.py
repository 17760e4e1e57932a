"""Bit-packing arithmetic.

A memory word of `word_bits` stores floor(word_bits / element_bits) data
elements; elements never straddle a word boundary.  As a consequence all
element widths sharing a floor quotient pack identically (for 16-bit words,
6, 7 and 8 bit elements all pack two per word), which is the plateau the
rest of the cost model inherits.
"""

from __future__ import annotations


class PackingError(ValueError):
    """Element width incompatible with the memory word width."""


def packing_factor(element_bits: int, word_bits: int) -> int:
    """Number of elements stored per memory word."""
    if element_bits < 1:
        raise PackingError(f"element_bits must be >= 1, got {element_bits}")
    if element_bits > word_bits:
        raise PackingError(
            f"multi-word elements are unsupported "
            f"({element_bits} b element, {word_bits} b word)"
        )
    return word_bits // element_bits


def words_needed(elements: int, element_bits: int, word_bits: int) -> int:
    """Memory words required to store `elements` values of `element_bits` each."""
    if elements < 0:
        raise ValueError(f"elements must be >= 0, got {elements}")
    factor = packing_factor(element_bits, word_bits)
    return -(-elements // factor)
