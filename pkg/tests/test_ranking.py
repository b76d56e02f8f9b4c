"""RankedList ordering contract and helpers."""

from pagesearch.ranking import RankedList, canonical_order, ranking_equal


class TestRankedList:
    def test_from_scores_orders_desc_then_page_id(self):
        ranked = RankedList.from_scores({"b": 2.0, "a": 2.0, "c": 5.0})
        assert ranked.page_ids() == ["c", "a", "b"]

    def test_top_n(self):
        ranked = RankedList.from_scores({"a": 3.0, "b": 2.0, "c": 1.0}, top_n=2)
        assert ranked.page_ids() == ["a", "b"]
        assert ranked.top(1).page_ids() == ["a"]

    def test_rank_of_is_one_based(self):
        ranked = RankedList.from_scores({"a": 3.0, "b": 2.0})
        assert ranked.rank_of("a") == 1
        assert ranked.rank_of("b") == 2
        assert ranked.rank_of("missing") is None

    def test_score_of(self):
        ranked = RankedList.from_scores({"a": 3.0})
        assert ranked.score_of("a") == 3.0
        assert ranked.score_of("x") is None

    def test_to_json(self):
        ranked = RankedList.from_scores({"a": 3.0, "b": 2.0}, retriever="bm25")
        assert ranked.to_json() == [
            {"rank": 1, "page_id": "a", "score": 3.0},
            {"rank": 2, "page_id": "b", "score": 2.0},
        ]

    def test_retagged_keeps_hits(self):
        ranked = RankedList.from_scores({"a": 1.0}, retriever="x")
        assert ranked.retagged("y").hits == ranked.hits
        assert ranked.retagged("y").retriever == "y"

    def test_ranking_equal_ignores_scores(self):
        a = RankedList([("x", 1.0), ("y", 0.5)])
        b = RankedList([("x", 9.0), ("y", 7.0)])
        c = RankedList([("y", 9.0), ("x", 7.0)])
        assert ranking_equal(a, b)
        assert not ranking_equal(a, c)

    def test_canonical_order(self):
        assert canonical_order([("b", 1.0), ("a", 1.0), ("c", 2.0)]) == [
            ("c", 2.0),
            ("a", 1.0),
            ("b", 1.0),
        ]
