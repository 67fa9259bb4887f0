"""
Tests for template NLG on both sides and the rule NLU over system responses.
"""
import numpy as np
import pytest

from src.models.domain_models import ActItem, DialogAct
from src.models.exceptions import WorldError
from src.services.template_service import GENERAL_INTENTS, TemplateService
from tests.fixtures.test_data import NOOFFER_RESPONSE, OFFER_RESPONSE


def inventory_domain(ontology, intent, slot):
    if intent in GENERAL_INTENTS:
        return "general"
    for name, schema in ontology.domains.items():
        if slot in schema.all_slots:
            return name
    return "restaurant"


class TestSystemTemplates:
    """System NLG and its inverse."""

    def test_every_template_parses_back_to_its_act(self, templates, ontology):
        """The rule NLU recovers the generating item for the full system inventory."""
        inventory = list(templates.system_inventory())
        assert len(inventory) > 30
        for intent, slot, template in inventory:
            domain = inventory_domain(ontology, intent, slot)
            assert templates.rule_nlu(template, domain) == DialogAct.of(ActItem(domain, intent, slot)), template

    def test_offer_response(self, templates):
        act = DialogAct.of(ActItem("restaurant", "inform", "name"), ActItem("restaurant", "inform", "phone"))
        assert templates.system_nlg(act) == OFFER_RESPONSE

    def test_nooffer_response(self, templates):
        assert templates.system_nlg(DialogAct.of(ActItem("restaurant", "nooffer", "food"))) == NOOFFER_RESPONSE

    def test_missing_template_falls_back(self, templates):
        text = templates.system_nlg(DialogAct.of(ActItem("hotel", "inform", "people")))
        assert text == "inform people [value_people] ."

    def test_lexicalized_response_is_understood(self, templates):
        act = templates.rule_nlu("sorry , nobody serves swedish food . is there anything else i can help with ?", "restaurant")
        assert act == DialogAct.of(ActItem("restaurant", "nooffer", "food"), ActItem("general", "reqmore"))

    def test_values_outside_the_ontology_are_rejected(self, templates):
        assert templates.rule_nlu("sorry , nobody serves martian food .", "restaurant") == DialogAct()

    def test_unknown_clauses_are_ignored(self, templates):
        act = templates.rule_nlu("the weather is lovely . how about [value_name] ?", "hotel")
        assert act == DialogAct.of(ActItem("hotel", "inform", "name"))

    def test_split_clauses(self):
        assert TemplateService.split_clauses("a b . c ? d") == ["a b .", "c ?", "d"]
        assert TemplateService.split_clauses("") == []


class TestUserTemplates:
    """User utterances from acts."""

    def test_new_domain_gets_an_intro(self, templates):
        act = DialogAct.of(ActItem("restaurant", "inform", "food", "chinese"), ActItem("restaurant", "request", "phone"))
        text = templates.template_nlg(act, known_domains=set())
        assert text == "i am looking for a restaurant . i would like chinese food . can i have the phone number ?"

    def test_known_domain_has_no_intro(self, templates):
        act = DialogAct.of(ActItem("restaurant", "inform", "area", "north"))
        assert templates.template_nlg(act, known_domains={"restaurant"}) == "i want something in the north ."

    def test_dontcare_and_bye(self, templates):
        act = DialogAct.of(ActItem("hotel", "inform", "area", "dontcare"), ActItem("general", "bye"))
        assert templates.template_nlg(act) == "i do not mind about the area . thank you , goodbye ."

    def test_generic_slot_template(self, templates):
        act = DialogAct.of(ActItem("train", "inform", "id", "tr100"))
        assert templates.template_nlg(act) == "the id should be tr100 ."

    def test_sampling_is_seeded(self, templates):
        act = DialogAct.of(ActItem("restaurant", "inform", "food", "indian"))
        first = templates.template_nlg(act, np.random.default_rng(3))
        second = templates.template_nlg(act, np.random.default_rng(3))
        assert first == second
        assert first in {"i would like indian food .", "i fancy some indian food ."}


class TestTemplateLoading:
    """Template file errors."""

    def test_missing_file_raises(self, tmp_path, ontology):
        with pytest.raises(WorldError):
            TemplateService(tmp_path / "missing.json", ontology)
