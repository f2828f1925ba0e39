"""Bundled scenario documents and their loader."""

from .loader import Scenario, list_scenarios, load_scenario, scenario_from_dict

__all__ = ["Scenario", "list_scenarios", "load_scenario", "scenario_from_dict"]
