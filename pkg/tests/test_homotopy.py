import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fibercode.base import min_distance
from fibercode.bundle import PlainBase, build_bundle, cycle_base
from fibercode.complexes import ChainComplex
from fibercode.gf2 import BitChain, Gf2Matrix, to_alist
from fibercode.homotopy import (
    ChainMap,
    HomotopyEquivalence,
    collapse_cell,
    combine_cells,
    compose_equivalences,
    identity_equivalence,
    lipschitz,
    load_equivalence,
    save_equivalence,
    transpose_equivalence,
    verify_homotopy,
    weight_reduce_bundle,
    weight_reduce_classical,
)


def _path_complex(edges: int) -> ChainComplex:
    """A path with the given number of edges: betti (1, 0)."""
    cols = [[i, i + 1] for i in range(edges)]
    return ChainComplex(
        (edges + 1, edges),
        (Gf2Matrix.from_col_support(cols, edges + 1),),
        (
            tuple(f"p{i}" for i in range(edges + 1)),
            tuple(f"e{i}" for i in range(edges)),
        ),
    )


def _random_classical(seed: int, n_checks=(2, 5), n_bits=(3, 6)) -> ChainComplex:
    """Random 1-complex with every bit checked and every check inhabited."""
    rng = random.Random(seed)
    m = rng.randint(*n_checks)
    n = rng.randint(*n_bits)
    while True:
        cols = [
            sorted(rng.sample(range(m), rng.randint(1, min(3, m))))
            for _ in range(n)
        ]
        seen = {c for col in cols for c in col}
        if len(seen) == m:
            return ChainComplex((m, n), (Gf2Matrix.from_col_support(cols, m),))


class TestChainMap:
    def test_identity_is_chain_map_with_unit_lipschitz(self):
        cx = _path_complex(3)
        one = ChainMap.identity(cx)
        assert one.lipschitz() == (1, 1)
        assert lipschitz(one) == (1, 1)
        assert one.transpose_lipschitz() == (1, 1)

    def test_rejects_non_chain_map(self):
        cx = _path_complex(2)
        maps = (Gf2Matrix.zeros(3, 3), Gf2Matrix.identity(2))
        with pytest.raises(ValueError, match="not a chain map"):
            ChainMap(cx, cx, maps)

    def test_rejects_wrong_shape(self):
        cx = _path_complex(2)
        with pytest.raises(ValueError, match="shape"):
            ChainMap(cx, cx, (Gf2Matrix.identity(2), Gf2Matrix.identity(2)))

    def test_composition_applies_right_map_first(self):
        cx = _path_complex(2)
        merged, equiv = combine_cells(cx, 1)
        back_and_forth = equiv.g @ equiv.f
        assert back_and_forth.source is cx and back_and_forth.target is cx
        # Forward then back is not the identity on the path (the homotopy
        # witnesses the difference), but is the identity on the merge.
        forth_and_back = equiv.f @ equiv.g
        for j, mat in enumerate(forth_and_back.maps):
            assert mat == Gf2Matrix.identity(merged.dims[j])

    def test_apply_moves_chains(self):
        cx = _path_complex(2)
        merged, equiv = combine_cells(cx, 1)
        image = equiv.g.apply(1, BitChain(1, 0b1))
        assert sorted(image.iter_support()) == [0, 1]

    def test_lipschitz_counts_column_and_row_weights(self):
        cx = _path_complex(2)
        merged, equiv = combine_cells(cx, 1)
        assert equiv.g.lipschitz() == (1, 2)
        assert equiv.f.transpose_lipschitz() == (2, 1)


class TestEquivalenceVerification:
    def test_identity_equivalence_verifies(self):
        cx = _path_complex(4)
        equiv = identity_equivalence(cx)
        assert verify_homotopy(equiv)
        report = equiv.lipschitz_report()
        assert report["f"] == (1, 1)
        assert report["g_transpose"] == (1, 1)

    def test_corrupted_homotopy_fails_verification(self):
        cx = _path_complex(2)
        merged, equiv = combine_cells(cx, 1)
        assert equiv.verify()
        h0 = equiv.h_source[0]
        corrupted = Gf2Matrix(
            [h0.rows[0] ^ 0b1] + list(h0.rows[1:]), h0.n_cols
        )
        broken = HomotopyEquivalence(
            equiv.f, equiv.g, (corrupted, equiv.h_source[1]), equiv.h_target
        )
        assert not broken.verify()

    def test_zero_maps_cannot_be_an_equivalence_of_a_real_code(self):
        cx = _path_complex(2)
        zero = ChainMap(
            cx, cx, (Gf2Matrix.zeros(3, 3), Gf2Matrix.zeros(2, 2))
        )
        equiv = HomotopyEquivalence(
            zero,
            zero,
            (Gf2Matrix.zeros(2, 3), Gf2Matrix.zeros(0, 2)),
            (Gf2Matrix.zeros(2, 3), Gf2Matrix.zeros(0, 2)),
        )
        # gf + I = I needs h d + d h = I; a path has homology, so no
        # homotopy can contract it and this particular h certainly fails.
        assert not equiv.verify()

    def test_homotopy_shape_mismatch_rejected(self):
        cx = _path_complex(2)
        one = ChainMap.identity(cx)
        with pytest.raises(ValueError, match="homotopy"):
            HomotopyEquivalence(
                one,
                one,
                (Gf2Matrix.zeros(3, 3), Gf2Matrix.zeros(0, 2)),
                (Gf2Matrix.zeros(2, 3), Gf2Matrix.zeros(0, 2)),
            )


class TestCombine:
    def test_two_edge_path_merges_to_single_edge(self):
        cx = _path_complex(2)
        merged, equiv = combine_cells(cx, 1)
        assert merged.dims == (2, 1)
        assert merged.boundary(1).col_support(0) == (0, 1)
        assert merged.labels == (("p0", "p2"), ("e0",))
        assert equiv.verify()

    def test_hand_computed_maps(self):
        cx = _path_complex(2)
        merged, equiv = combine_cells(cx, 1)
        # Forward: e0 -> merged edge, e1 -> 0, middle point -> far endpoint.
        assert equiv.f.maps[1].col_support(0) == (0,)
        assert equiv.f.maps[1].col_support(1) == ()
        assert equiv.f.maps[0].col_support(1) == (1,)
        # Reverse opens the merged edge back up to both halves.
        assert equiv.g.maps[1].col_support(0) == (0, 1)
        # The homotopy pushes the removed point along the removed edge.
        assert equiv.h_source[0].col_support(1) == (1,)
        assert equiv.h_source[0].col_support(0) == ()
        for mat in equiv.h_target:
            assert mat.is_zero()

    def test_betti_preserved(self):
        cx = cycle_base(4).as_complex()
        merged, equiv = combine_cells(cx, 2)
        assert merged.betti(0) == cx.betti(0)
        assert merged.betti(1) == cx.betti(1)
        assert equiv.verify()

    def test_rejects_wrong_degree_vertices(self):
        star = ChainComplex(
            (4, 3),
            (Gf2Matrix.from_col_support([[0, 1], [0, 2], [0, 3]], 4),),
        )
        with pytest.raises(ValueError, match="coboundary"):
            combine_cells(star, 0)  # hub has three edges
        with pytest.raises(ValueError, match="coboundary"):
            combine_cells(star, 1)  # leaf has one
        with pytest.raises(ValueError, match="out of range"):
            combine_cells(star, 9)


class TestCollapse:
    def test_edge_collapse_merges_endpoints(self):
        cx = _path_complex(2)
        merged, equiv = collapse_cell(cx, 0)
        assert merged.dims == (2, 1)
        assert merged.labels == (("p0", "p2"), ("e1",))
        assert merged.boundary(1).col_support(0) == (0, 1)
        assert equiv.verify()

    def test_hand_computed_maps(self):
        cx = _path_complex(2)
        merged, equiv = collapse_cell(cx, 0)
        # Both endpoints of the collapsed edge land on the merged point.
        assert equiv.f.maps[0].col_support(0) == (0,)
        assert equiv.f.maps[0].col_support(1) == (0,)
        assert equiv.f.maps[1].col_support(0) == ()
        # The reverse map picks the lower endpoint and reroutes the
        # surviving edge through the collapsed one.
        assert equiv.g.maps[0].col_support(0) == (0,)
        assert equiv.g.maps[1].col_support(0) == (0, 1)
        assert equiv.h_source[0].col_support(1) == (0,)

    def test_cycle_collapse_keeps_loop(self):
        cx = cycle_base(3).as_complex()
        merged, equiv = collapse_cell(cx, 1)
        assert merged.betti(0) == 1
        assert merged.betti(1) == 1
        assert equiv.verify()

    def test_rejects_degenerate_edges(self):
        loop = ChainComplex((1, 1), (Gf2Matrix.zeros(1, 1),))
        with pytest.raises(ValueError, match="boundary"):
            collapse_cell(loop, 0)


class TestComposeAndTranspose:
    def test_combine_then_collapse_round_trip(self):
        cx = _path_complex(3)
        mid, eq1 = combine_cells(cx, 1)
        end, eq2 = collapse_cell(mid, 1)
        total = compose_equivalences(eq1, eq2)
        assert total.verify()
        assert total.f.source is cx and total.f.target is end
        assert end.betti(0) == cx.betti(0) == 1
        # Exactness on the small side survives composition.
        for j, mat in enumerate((total.f @ total.g).maps):
            assert mat == Gf2Matrix.identity(end.dims[j])

    def test_compose_requires_matching_endpoints(self):
        cx = _path_complex(3)
        _, eq1 = combine_cells(cx, 1)
        with pytest.raises(ValueError, match="endpoints"):
            compose_equivalences(eq1, eq1)

    def test_transpose_swaps_roles_and_verifies(self):
        cx = _path_complex(2)
        merged, equiv = combine_cells(cx, 1)
        flipped = transpose_equivalence(equiv)
        assert flipped.verify()
        assert flipped.f.source.dims == tuple(reversed(cx.dims))
        again = transpose_equivalence(flipped, source=cx, target=merged)
        assert again.verify()
        assert again.f.maps == equiv.f.maps
        assert again.g.maps == equiv.g.maps
        assert again.h_source == equiv.h_source


class TestRandomRewrites:
    @given(st.integers(min_value=0, max_value=200))
    @settings(max_examples=40, deadline=None)
    def test_any_legal_rewrite_gives_verified_equivalence(self, seed):
        cx = _random_classical(seed)
        rng = random.Random(seed + 1)
        d1 = cx.boundary(1)
        combinable = [
            v for v in range(cx.dims[0]) if len(d1.row_support(v)) == 2
        ]
        collapsible = [
            e for e in range(cx.dims[1]) if len(d1.col_support(e)) == 2
        ]
        moves = [("combine", v) for v in combinable] + [
            ("collapse", e) for e in collapsible
        ]
        if not moves:
            return
        kind, cell = rng.choice(moves)
        rewritten, equiv = (
            combine_cells(cx, cell) if kind == "combine" else collapse_cell(cx, cell)
        )
        assert equiv.verify()
        assert rewritten.betti(0) == cx.betti(0)
        assert rewritten.betti(1) == cx.betti(1)


class TestClassicalReduction:
    def test_single_bit_three_checks(self):
        cx = ChainComplex(
            (3, 1), (Gf2Matrix.from_col_support([[0, 1, 2]], 3),)
        )
        reduced, equiv = weight_reduce_classical(cx)
        assert reduced.dims == (5, 3)
        assert equiv.verify()
        assert reduced.labels[1] == ("b0.c0", "b0.c1", "b0.c2")
        assert reduced.labels[0] == ("c0.b0", "c1.b0", "c2.b0", "ac0.1", "ac0.2")

    def test_cell_counts_and_degrees(self):
        code = cycle_base(5)
        cx = code.as_complex()
        edges = sum(len(row) for row in code.adjacency)
        reduced, equiv = weight_reduce_classical(code)
        assert reduced.dims == (2 * edges - cx.dims[1], 2 * edges - cx.dims[0])
        d1 = reduced.boundary(1)
        col_degs = {len(d1.col_support(j)) for j in range(reduced.dims[1])}
        row_degs = {len(d1.row_support(i)) for i in range(reduced.dims[0])}
        assert col_degs <= {2, 3}
        assert row_degs <= {2, 3}

    def test_equivalence_lands_back_on_original(self):
        cx = _random_classical(7)
        reduced, equiv = weight_reduce_classical(cx)
        assert equiv.f.source is reduced
        assert equiv.f.target is cx
        assert equiv.verify()
        for j in range(2):
            assert equiv.f.maps[j] @ equiv.g.maps[j] == Gf2Matrix.identity(
                cx.dims[j]
            )
            assert equiv.h_target[j].is_zero()

    @given(st.integers(min_value=0, max_value=300))
    @settings(max_examples=30, deadline=None)
    def test_random_codes_reduce_and_verify(self, seed):
        cx = _random_classical(seed)
        reduced, equiv = weight_reduce_classical(cx)
        assert equiv.verify()
        assert reduced.betti(0) == cx.betti(0)
        assert reduced.betti(1) == cx.betti(1)
        d1 = reduced.boundary(1)
        assert d1.max_col_weight() <= 3
        assert d1.max_row_weight() <= 3

    def test_rejects_unchecked_bits_and_empty_checks(self):
        dangling_bit = ChainComplex(
            (1, 2), (Gf2Matrix.from_col_support([[0], []], 1),)
        )
        with pytest.raises(ValueError, match="every bit"):
            weight_reduce_classical(dangling_bit)
        empty_check = ChainComplex(
            (2, 1), (Gf2Matrix.from_col_support([[0]], 2),)
        )
        with pytest.raises(ValueError, match="every bit"):
            weight_reduce_classical(empty_check)

    def test_distance_transport_bound_is_sharp_enough(self):
        # The repetition code on a 5-cycle: distance 5 before reduction.
        code = cycle_base(5)
        reduced, equiv = weight_reduce_classical(code)
        d_orig, method = min_distance(code.matrix())
        assert method == "exact"
        reduced_mat = reduced.boundary(1)
        d_red, method = min_distance(reduced_mat)
        assert method == "exact"
        k1 = equiv.f.lipschitz()[1]
        # A reduced codeword maps to a nonzero original codeword at most
        # k1 times heavier, so d_reduced >= d_original / k1.
        assert d_red * k1 >= d_orig
        assert d_red >= 5  # copies only subdivide; distance cannot drop


class TestBundleReduction:
    def test_twisted_cycle_bundle(self):
        bundle = build_bundle(cycle_base(3), 4, {(0, 0): 1, (1, 0): 2})
        reduced, equiv = weight_reduce_bundle(bundle)
        assert equiv.verify()
        assert equiv.f.source is reduced.complex
        assert equiv.f.target is bundle.complex
        assert reduced.complex.betti(1) == bundle.complex.betti(1)
        for j in range(3):
            assert equiv.f.maps[j] @ equiv.g.maps[j] == Gf2Matrix.identity(
                bundle.complex.dims[j]
            )
            assert equiv.h_target[j].is_zero()

    def test_reduced_stabilizers_are_bounded(self):
        bundle = build_bundle(cycle_base(4), 3, {(1, 1): 2, (3, 2): 1})
        reduced, _ = weight_reduce_bundle(bundle)
        css = reduced.css_code()
        css.validate()
        assert css.h_x.max_row_weight() <= 6
        assert css.h_z.max_row_weight() <= 6

    def test_untwisted_torus_reduces(self):
        bundle = build_bundle(cycle_base(3), 2)
        reduced, equiv = weight_reduce_bundle(bundle)
        assert equiv.verify()
        assert reduced.ell == bundle.ell
        assert reduced.complex.betti(1) == bundle.complex.betti(1) == 2

    def test_reduced_twists_sit_on_copy_edges(self):
        bundle = build_bundle(cycle_base(3), 5, {(2, 2): 3})
        reduced, _ = weight_reduce_bundle(bundle)
        live = {t for t in reduced.twist_of.values() if t % 5}
        assert live == {3}
        labels = reduced.base_complex.labels
        for (b, a), t in reduced.twist_of.items():
            if t % 5:
                assert labels[1][b] == "b2.c2"
                assert labels[0][a] == "c2.b2"

    def test_fiber_ell_carries_over(self):
        twists = {(0, 0): 3, (1, 1): 6}
        bundle = build_bundle(cycle_base(3), 9, twists)
        bundle = type(bundle)(
            base_code=bundle.base_code,
            m_fiber=bundle.m_fiber,
            twists=bundle.twists,
            complex=bundle.complex,
            ell=3,
        )
        reduced, equiv = weight_reduce_bundle(bundle)
        assert reduced.ell == 3
        assert equiv.verify()


class TestPlainBase:
    def test_round_trip_through_complex(self):
        cx = cycle_base(4).as_complex()
        plain = PlainBase.from_complex(cx)
        assert plain.as_complex() == cx
        assert plain.n == 4 and plain.m == 4

    def test_bundles_agree_with_partitioned_base(self):
        code = cycle_base(3)
        twists = {(0, 0): 1, (2, 2): 2}
        direct = build_bundle(code, 3, twists)
        via_plain = build_bundle(
            PlainBase.from_complex(code.as_complex()), 3, twists
        )
        assert direct.complex == via_plain.complex

    def test_validation(self):
        with pytest.raises(ValueError, match="adjacency row per check"):
            PlainBase(n=2, m=2, adjacency=((0,),))
        with pytest.raises(ValueError, match="out of range"):
            PlainBase(n=2, m=1, adjacency=((0, 5),))
        with pytest.raises(ValueError, match="sorted"):
            PlainBase(n=2, m=1, adjacency=((1, 0),))


class TestSerialization:
    def test_round_trip(self, tmp_path):
        cx = _random_classical(11)
        reduced, equiv = weight_reduce_classical(cx)
        save_equivalence(equiv, tmp_path / "eq")
        loaded = load_equivalence(tmp_path / "eq")
        assert loaded.verify()
        assert loaded.f.maps == equiv.f.maps
        assert loaded.g.maps == equiv.g.maps
        assert loaded.h_source == equiv.h_source
        assert loaded.f.source.dims == reduced.dims

    def test_tampering_is_caught(self, tmp_path):
        cx = _path_complex(2)
        merged, equiv = combine_cells(cx, 1)
        save_equivalence(equiv, tmp_path / "eq")
        target = tmp_path / "eq" / "h_source0.alist"
        zero = Gf2Matrix.zeros(
            equiv.h_source[0].n_rows, equiv.h_source[0].n_cols
        )
        target.write_text(to_alist(zero))
        with pytest.raises(ValueError):
            load_equivalence(tmp_path / "eq")
