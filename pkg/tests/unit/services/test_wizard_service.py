"""
Tests for the scripted wizard dialog system.
"""
import numpy as np
import pytest

from src.models.domain_models import ActItem, DialogAct
from src.services.wizard_service import WizardDialogSystem


def user(*items):
    return DialogAct.of(*items)


def inform(slot, value, domain="restaurant"):
    return ActItem(domain, "inform", slot, value)


@pytest.fixture
def wizard(world, templates, lexicalizer):
    system = WizardDialogSystem(world, templates, lexicalizer)
    system.reset(np.random.default_rng(0))
    return system


class TestWizardPolicy:
    """Per-turn decisions of the wizard."""

    def test_many_matches_narrow_the_search(self, wizard):
        reply = wizard.respond("i would like chinese food .", user(inform("food", "chinese")))
        assert reply.act == DialogAct.of(ActItem("restaurant", "inform", "choice"), ActItem("restaurant", "request", "area"))
        assert reply.response == "there are [value_choice] options . which area would you like ?"
        assert reply.response_lex == "there are many options . which area would you like ?"
        assert reply.db["restaurant"].count == 6

    def test_offer_names_first_match(self, wizard):
        wizard.respond("", user(inform("food", "chinese")))
        reply = wizard.respond("", user(inform("area", "north")))
        assert reply.act == DialogAct.of(
            ActItem("restaurant", "inform", "name"),
            ActItem("restaurant", "inform", "choice"),
            ActItem("restaurant", "offerbook"),
        )
        assert "golden wok" in reply.response_lex
        assert reply.belief.get("restaurant") == {"food": "chinese", "area": "north"}

    def test_requests_are_answered_then_reqmore(self, wizard):
        wizard.respond("", user(inform("food", "chinese"), inform("area", "north")))
        reply = wizard.respond("", user(ActItem("restaurant", "request", "phone")))
        assert reply.act == DialogAct.of(ActItem("restaurant", "inform", "phone"), ActItem("general", "reqmore"))
        assert "01223350000" in reply.response_lex

    def test_booking_confirmed_once(self, wizard):
        wizard.respond("", user(inform("food", "chinese"), inform("area", "north")))
        booking = user(ActItem("restaurant", "book", "people", "2"), ActItem("restaurant", "book", "day", "monday"))
        reply = wizard.respond("", booking)
        assert reply.act.has("restaurant", "book", "people")
        assert reply.act.has("restaurant", "book", "day")
        assert "2 people" in reply.response_lex
        again = wizard.respond("", booking)
        assert not again.act.has_intent("book")

    def test_nooffer_names_blocking_constraints(self, wizard):
        reply = wizard.respond("", user(inform("area", "north"), inform("pricerange", "cheap"), inform("food", "swedish")))
        assert {item.slot for item in reply.act.filter("nooffer")} == {"area", "pricerange", "food"}
        assert reply.db["restaurant"].bucket == "0"
        assert "swedish" in reply.response_lex

    def test_dontcare_constraints_are_not_blocking(self, wizard):
        reply = wizard.respond("", user(inform("food", "chinese"), inform("area", "dontcare")))
        assert not reply.act.has_intent("nooffer")
        assert reply.act.has("restaurant", "request", "pricerange")

    def test_bye_and_no_domain(self, wizard):
        assert wizard.respond("hello", DialogAct()).act == DialogAct.of(ActItem("general", "reqmore"))
        assert wizard.respond("bye", user(ActItem("general", "bye"))).act == DialogAct.of(ActItem("general", "bye"))

    def test_reset_clears_state(self, wizard):
        wizard.respond("", user(inform("food", "chinese")))
        wizard.reset(np.random.default_rng(1))
        assert wizard.belief.is_empty()
        assert wizard.current_domain is None
