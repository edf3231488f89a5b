from .dissect import DissectedRecord, Dissector, dissect_file, dissect_lines
from .scenario import (
    Case,
    Scenario,
    ScenarioError,
    ScenarioRuntimeError,
    bundled,
    dumps_records,
    load_scenario,
    parse_scenario,
    run_scenario,
)
