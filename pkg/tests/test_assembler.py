import pytest

from oracles import coverage_rows_from_doc, covering_packages_from_doc
from isabel.assembler import EmptyLinkSet, assemble
from isabel.linking import LinkedEntity


def link(eid, score=1.0, index=0):
    return LinkedEntity(entity_id=eid, score=score, subsentence_index=index)


class TestAssemble:
    def test_single_cover(self, kg):
        result = assemble(kg, [link("STORAGE_1TB"), link("GRAPHIC_3080", index=1)])
        assert result.required == ("GRAPHIC_3080", "STORAGE_1TB")
        assert result.package_ids == ("GAMING_ADVANCED",)
        assert result.diagnostics == ()

    def test_multiple_covers_in_id_order(self, kg):
        result = assemble(kg, [link("STORAGE_512GB"), link("RAM_8GB", index=1)])
        assert result.package_ids == ("GAMING_BEGINNER", "GAMING_MEDIUM")

    def test_duplicate_links_collapse(self, kg):
        result = assemble(kg, [link("RAM_8GB"), link("RAM_8GB", index=1)])
        assert result.required == ("RAM_8GB",)
        assert result.package_ids == ("GAMING_BEGINNER", "GAMING_MEDIUM")

    def test_empty_link_set_raises(self, kg):
        with pytest.raises(EmptyLinkSet):
            assemble(kg, [])

    def test_no_cover_produces_diagnostics(self, kg, kg_doc):
        result = assemble(kg, [link("RAM_16GB"), link("STORAGE_512GB", index=1)])
        assert result.package_ids == ()
        assert result.diagnostics == tuple(
            coverage_rows_from_doc(kg_doc, {"RAM_16GB", "STORAGE_512GB"})
        )
        assert result.diagnostics[0] == ("GAMING_ADVANCED", 1, ("STORAGE_512GB",))

    def test_agrees_with_doc_oracle(self, kg, kg_doc):
        for required in [
            {"RAM_8GB"},
            {"CPU_I7"},
            {"CPU_I5", "STORAGE_512GB", "RAM_8GB"},
            {"CPU_I3", "GRAPHIC_3080"},
        ]:
            links = [link(eid, index=i) for i, eid in enumerate(sorted(required))]
            assert list(assemble(kg, links).package_ids) == covering_packages_from_doc(
                kg_doc, required
            )
