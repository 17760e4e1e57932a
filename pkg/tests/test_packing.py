import pytest

from qmap.packing import PackingError, packing_factor, words_needed


class TestPackingFactor:
    def test_exact_fit(self):
        assert packing_factor(8, 16) == 2

    def test_plateau_above_half_word(self):
        # 6, 7 and 8 bit elements pack identically into 16-bit words
        assert packing_factor(6, 16) == packing_factor(7, 16) == packing_factor(8, 16) == 2

    def test_narrow_elements(self):
        assert packing_factor(2, 16) == 8

    def test_full_word(self):
        assert packing_factor(16, 16) == 1

    def test_rejects_multi_word_elements(self):
        with pytest.raises(PackingError):
            packing_factor(17, 16)

    def test_rejects_zero_width(self):
        with pytest.raises(PackingError):
            packing_factor(0, 16)


class TestWordsNeeded:
    def test_exact_division(self):
        assert words_needed(1000, 8, 16) == 500

    def test_rounds_up(self):
        assert words_needed(5, 4, 16) == 2

    def test_zero_elements(self):
        assert words_needed(0, 2, 16) == 0

    def test_monotone_in_element_bits(self):
        for elements in (1, 7, 64, 1000):
            previous = None
            for bits in range(16, 0, -1):
                words = words_needed(elements, bits, 16)
                if previous is not None:
                    assert words <= previous
                previous = words

    def test_plateau_matches_packing_factor(self):
        for b1 in range(1, 17):
            for b2 in range(1, 17):
                if 16 // b1 == 16 // b2:
                    assert words_needed(123, b1, 16) == words_needed(123, b2, 16)

    def test_lower_bound(self):
        # padding never beats the information-theoretic word count
        for elements in range(0, 40):
            for bits in range(1, 17):
                assert words_needed(elements, bits, 16) >= -(-elements * bits // 16)
