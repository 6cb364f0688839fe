# A four-instruction session against one scene: each approved plan's
# post-operation environment becomes the next query's input, so the model
# never needs the full conversation history to stay grounded.

import json
import tempfile

from taskplan import InferenceParams, ScriptedBackend, parse_environment, serialize_environment
from taskplan.replay import SHELF_ENVIRONMENT, SHELF_SESSION, script_path
from taskplan.sessions import SessionStore

with tempfile.TemporaryDirectory() as tmp:
    store = SessionStore(tmp)
    session = store.create_session(parse_environment(json.dumps(SHELF_ENVIRONMENT)), "lfo", "lfo")
    backend = ScriptedBackend.from_file(script_path("lfo_shelf_session.json"))
    params = InferenceParams()

    for instruction, _obj, _actions in SHELF_SESSION["steps"]:
        print(f"\n>>> {instruction}")
        result = store.run_instruction(session, instruction, backend, params)
        print("    outcome:", result.outcome)
        store.approve(session, result.final_plan)
        for name, states in session.current_env.to_data()["object_states"].items():
            print(f"    {name}: {states}")

    print("\nfinal environment:")
    print(serialize_environment(session.current_env))
    print("\nchaining re-verified offline:", store.replay_approved(session) == session.current_env)
