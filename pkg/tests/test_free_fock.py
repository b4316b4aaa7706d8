import numpy as np
import pytest

from src.algebra.errors import DimensionMismatch, TruncationError
from src.algebra.free_fock import (
    Bra,
    BraKetWord,
    FockVector,
    Ket,
    TestSpace,
    apply_annihilator,
    apply_creator,
    braket_reduce,
    fock_inner,
    fock_norm,
    free_moment_combinatorial,
    free_moment_oracle,
    vacuum,
)
from src.algebra.partitions import iter_sequences, parse_epsilon


def random_vectors(rng, count, dim):
    return [rng.normal(size=dim) + 1j * rng.normal(size=dim) for _ in range(count)]


def random_fock_vector(rng, space, truncation):
    levels = [np.asarray(complex(rng.normal(), rng.normal()))]
    for n in range(1, truncation + 1):
        shape = (space.dim,) * n
        levels.append(rng.normal(size=shape) + 1j * rng.normal(size=shape))
    return FockVector(space, tuple(levels))


class TestFockSpace:
    def test_vacuum_has_unit_norm(self):
        assert fock_norm(vacuum(TestSpace(3), 2)) == pytest.approx(1.0)

    def test_creator_then_annihilator_gives_inner_product(self):
        space = TestSpace(2)
        f = np.array([1.0, 2.0j])
        g = np.array([0.5, 1.0])
        state = apply_annihilator(f, apply_creator(g, vacuum(space, 2)))
        assert state.vacuum_component() == pytest.approx(space.inner(f, g))

    def test_annihilator_kills_vacuum(self):
        state = apply_annihilator(np.ones(2), vacuum(TestSpace(2), 2))
        assert fock_norm(state) == pytest.approx(0.0)

    def test_creator_norm(self):
        space = TestSpace(2)
        g = np.array([3.0, 4.0])
        assert fock_norm(apply_creator(g, vacuum(space, 1))) == pytest.approx(5.0)

    def test_inner_requires_same_truncation(self):
        space = TestSpace(2)
        with pytest.raises(DimensionMismatch):
            fock_inner(vacuum(space, 1), vacuum(space, 2))

    def test_creator_and_annihilator_are_adjoint(self):
        rng = np.random.default_rng(21)
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        space = TestSpace(3, a.conj().T @ a + np.eye(3))
        for _ in range(20):
            u, v = random_fock_vector(rng, space, 3), random_fock_vector(rng, space, 3)
            g = random_vectors(rng, 1, 3)[0]
            assert fock_inner(apply_creator(g, u), v) == pytest.approx(fock_inner(u, apply_annihilator(g, v)))

    def test_inner_is_hermitian(self):
        rng = np.random.default_rng(22)
        space = TestSpace(2)
        u, v = random_fock_vector(rng, space, 3), random_fock_vector(rng, space, 3)
        assert fock_inner(u, v) == pytest.approx(np.conj(fock_inner(v, u)))
        assert fock_inner(u, u).imag == pytest.approx(0.0, abs=1e-12)

    def test_gram_matrix_must_be_positive(self):
        with pytest.raises(ValueError):
            TestSpace(2, np.array([[1.0, 0.0], [0.0, -1.0]]))

    def test_wrong_vector_dimension(self):
        with pytest.raises(DimensionMismatch):
            apply_creator(np.ones(3), vacuum(TestSpace(2), 1))


class TestFreeMoments:
    def test_oracle_matches_combinatorial_formula(self):
        rng = np.random.default_rng(1234)
        for length in (2, 4, 6, 8):
            for eps in iter_sequences(length):
                for _ in range(50):
                    dim = int(rng.integers(1, 5))
                    gs = random_vectors(rng, length, dim)
                    oracle = free_moment_oracle(eps, gs, truncation=eps.n)
                    combinatorial = free_moment_combinatorial(eps, gs)
                    assert oracle == pytest.approx(combinatorial, rel=1e-10, abs=1e-12)

    def test_nonstandard_gram(self):
        rng = np.random.default_rng(7)
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        space = TestSpace(3, a.conj().T @ a + np.eye(3))
        eps = parse_epsilon("1,1,0,1,0,0")
        gs = random_vectors(rng, 6, 3)
        assert free_moment_oracle(eps, gs, 3, space) == pytest.approx(
            free_moment_combinatorial(eps, gs, space), rel=1e-10
        )

    def test_trivial_sequence_vanishes(self):
        rng = np.random.default_rng(3)
        eps = parse_epsilon("1,0,0,1")
        gs = random_vectors(rng, 4, 2)
        assert free_moment_combinatorial(eps, gs) == 0
        assert abs(free_moment_oracle(eps, gs, 2)) < 1e-12

    def test_free_relation_has_no_symmetrization(self):
        # b(f) b(g) b+(g) b+(f) = <g,g><f,f>, the crossing term is absent
        f = np.array([1.0, 0.0])
        g = np.array([0.6, 0.8])
        value = free_moment_combinatorial(parse_epsilon("1,1,0,0"), [f, g, g, f])
        assert value == pytest.approx(1.0)

    @pytest.mark.parametrize("text", ["1,1,1,0", "1,1,1,1", "1,1,1,1,0,0"])
    def test_weight_above_truncation_never_returns(self, text):
        # more creators than n: the dropped weight cannot reach the vacuum again
        rng = np.random.default_rng(9)
        eps = parse_epsilon(text)
        gs = random_vectors(rng, len(eps), 2)
        assert free_moment_oracle(eps, gs, eps.n) == 0
        assert free_moment_combinatorial(eps, gs) == 0

    def test_truncation_below_n_is_rejected(self):
        with pytest.raises(TruncationError):
            free_moment_oracle(parse_epsilon("1,1,0,0"), random_vectors(np.random.default_rng(0), 4, 2), 1)

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatch):
            free_moment_combinatorial(parse_epsilon("1,0"), [np.ones(2)])


class TestBraKetReduction:
    def test_adjacent_bra_ket_contracts(self):
        reduction = braket_reduce(BraKetWord((Bra("a"), Ket("b"))))
        assert reduction.pairs == (("a", "b"),)
        assert reduction.residual == ()

    def test_nested_word(self):
        word = BraKetWord((Bra(4), Bra(3), Ket(2), Ket(1)))
        reduction = braket_reduce(word)
        assert set(reduction.pairs) == {(3, 2), (4, 1)}
        assert reduction.residual == ()

    def test_ket_before_bra_is_irreducible(self):
        reduction = braket_reduce(BraKetWord((Ket(1), Bra(2))))
        assert reduction.pairs == ()
        assert len(reduction.residual) == 2

    def test_value_independent_of_order(self):
        word = BraKetWord((Bra(6), Ket(5), Bra(4), Bra(3), Ket(2), Ket(1)))
        labels = {i: complex(i, 1) for i in range(1, 7)}

        def inner(bra, ket):
            return np.conj(labels[bra]) * labels[ket]

        values = {braket_reduce(word, order).value(inner) for order in ([0], [1], [2, 0, 1])}
        assert len({complex(round(v.real, 12), round(v.imag, 12)) for v in values}) == 1

    def test_rejects_foreign_tokens(self):
        with pytest.raises(TypeError):
            BraKetWord(("a",))
