"""Release gate: one test per acceptance criterion.

Each test prints exactly one PASS or FAIL line naming its criterion, so a
verbose run reads as a checklist.  Everything here goes through public
package interfaces plus the independent oracles in ``oracles.py``; nothing
reaches into module internals.
"""

import time

import numpy as np

from conftest import rice_spec_document
from oracles import windowed_estimates
from test_eval import ROUGE_FIXTURE

from taskguide.embeddings import fallback_embed_text
from taskguide.evaluation import (
    AnnotatedStream,
    GoldSegment,
    ReportRow,
    evaluate_retrieval,
    report_table,
    rouge_l,
    rouge_n,
)
from taskguide.frames import TARGET_LABELS, apply_mapping, build_mapping
from taskguide.matcher import MatchState, item_vectors_from_texts
from taskguide.model import EmbeddingStream, TranscriptChunk, load_spec
from taskguide.session import (
    SessionConfig,
    SessionEngine,
    WizardAction,
    event_visible_to,
)
from taskguide.tcn import (
    CausalTcnConfig,
    OnlineTcnState,
    forward,
    init_model,
    predict_labels,
    predict_online,
    train,
    training_loss,
    training_loss_and_gradients,
)


def _criterion(name: str, ok: bool, detail: str = "") -> None:
    line = f"{'PASS' if ok else 'FAIL'}: {name}"
    if detail:
        line = f"{line} [{detail}]"
    print(line)
    assert ok, line


def _numbered_spec(n_items: int):
    return load_spec(
        {
            "spec_id": f"steps-{n_items}",
            "title": "Numbered steps",
            "items": [
                {
                    "index": i,
                    "text": f"perform step number {i}",
                    "frame": {"Action": ["perform"], "Receiver": [f"step {i}"]},
                    "actions": [],
                }
                for i in range(n_items)
            ],
        }
    )


# -- retrieval ---------------------------------------------------------------


def test_matcher_agrees_with_brute_force_recomputation():
    rng = np.random.default_rng(20260823)
    started = time.perf_counter()
    streams = 0
    mismatches = 0
    for trial in range(100):
        n_items = int(rng.integers(2, 11))
        dim = int(rng.integers(8, 65))
        window_ms = int(rng.integers(1, 9)) * 1000
        item_vectors = rng.normal(size=(n_items, dim))
        if trial % 9 == 0:
            # degenerate rows must score 0, never NaN
            item_vectors[int(rng.integers(n_items))] = 0.0
        state = MatchState(_numbered_spec(n_items), item_vectors, window_ms=window_ms)

        t = 0
        observations = []
        online = []
        for tick in range(int(rng.integers(5, 16))):
            t += int(rng.integers(400, 1500))
            if (tick + trial) % 11 == 0:
                vec = np.zeros(dim)
            else:
                vec = rng.normal(size=dim)
            observations.append((t, vec.tolist()))
            online.append(state.observe(t, vec).item)

        oracle = [
            item
            for item, _, _ in windowed_estimates(
                item_vectors.tolist(), observations, window_ms
            )
        ]
        streams += 1
        if online != oracle:
            mismatches += 1
    elapsed = time.perf_counter() - started
    _criterion(
        "matcher oracle equivalence",
        streams >= 100 and mismatches == 0 and elapsed < 10.0,
        f"{streams} streams, {mismatches} mismatches, {elapsed:.2f}s",
    )


def test_oracle_streams_score_perfectly_at_every_window():
    spec = load_spec(rice_spec_document())
    vectors = item_vectors_from_texts(spec)
    windows_s = (1, 2, 4, 6, 8)
    rows = []
    perfect = True

    def is_perfect(scores) -> bool:
        return (
            scores.accuracy == 1.0
            and scores.rouge1.f1 == 1.0
            and scores.rouge2.f1 == 1.0
            and scores.rouge_l.f1 == 1.0
        )

    for seconds in windows_s:
        window_scores = []
        for item in range(len(spec.items)):
            timestamps = list(range(0, 30000, 1000))
            annotated = AnnotatedStream(
                gold=[GoldSegment(start_ms=0, end_ms=30000, item=item)],
                stream=EmbeddingStream(
                    timestamps_ms=timestamps,
                    vectors=np.tile(vectors[item], (len(timestamps), 1)),
                    cadence_ms=1000,
                ),
            )
            scores = evaluate_retrieval(
                spec,
                annotated,
                window_ms=seconds * 1000,
                cadence_ms=1000,
                item_vectors=vectors,
            )
            perfect = perfect and is_perfect(scores)
            window_scores.append(scores)
        rows.append(
            ReportRow(
                label=f"window-{seconds}s",
                scores=window_scores[0],
                window_ms=seconds * 1000,
            )
        )

    # transcript-driven configuration rounds out the table shape
    gold = [GoldSegment(i * 10000, (i + 1) * 10000, i) for i in range(3)]
    chunks = [
        TranscriptChunk(i, spec.items[i].text, i * 10000, (i + 1) * 10000)
        for i in range(3)
    ]
    scores = evaluate_retrieval(
        spec, AnnotatedStream(gold=gold, chunks=chunks), cadence_ms=1000
    )
    perfect = perfect and is_perfect(scores)
    rows.append(ReportRow(label="transcript", scores=scores))

    _, data = report_table(rows)
    shape_ok = len(data["configurations"]) == 6 and all(
        {"rouge1", "rouge2", "rouge_l", "accuracy"} <= set(entry)
        for entry in data["configurations"]
    )
    _criterion(
        "retrieval sanity",
        perfect and shape_ok,
        "6 configurations x 4 metrics, windows 1/2/4/6/8 s at 1 Hz",
    )


# -- segmentation network ----------------------------------------------------


def test_future_input_never_reaches_past_output():
    rng = np.random.default_rng(11)
    configs = 0
    causality_breaks = 0
    online_mismatches = 0
    for trial in range(50):
        config = CausalTcnConfig(
            input_dim=int(rng.integers(2, 7)),
            num_classes=int(rng.integers(2, 5)),
            num_stages=int(rng.integers(1, 3)),
            layers_per_stage=int(rng.integers(1, 4)),
            hidden_dim=int(rng.integers(3, 10)),
        )
        model = init_model(config, seed=1000 + trial)
        frames = int(rng.integers(4, 16))
        cut = int(rng.integers(1, frames))
        x = rng.normal(size=(frames, config.input_dim))
        tampered = x.copy()
        tampered[cut:] = rng.normal(size=(frames - cut, config.input_dim)) * 5.0

        configs += 1
        for clean, dirty in zip(forward(model, x), forward(model, tampered)):
            if not np.array_equal(clean[:cut], dirty[:cut]):
                causality_breaks += 1

        final = forward(model, x)[-1]
        shifted = final - final.max(axis=1, keepdims=True)
        batch_probs = np.exp(shifted)
        batch_probs /= batch_probs.sum(axis=1, keepdims=True)
        state = OnlineTcnState(model)
        for t in range(frames):
            label, probs = predict_online(model, state, x[t])
            if not (
                np.array_equal(probs, batch_probs[t])
                and label == int(np.argmax(batch_probs[t]))
            ):
                online_mismatches += 1
    _criterion(
        "causality suite",
        configs == 50 and causality_breaks == 0 and online_mismatches == 0,
        f"{configs} configs, {causality_breaks} causality breaks, "
        f"{online_mismatches} online/batch mismatches",
    )


def test_analytic_gradients_match_central_differences():
    config = CausalTcnConfig(
        input_dim=4, num_classes=3, num_stages=1, layers_per_stage=2, hidden_dim=4
    )
    model = init_model(config, seed=12)
    rng = np.random.default_rng(12)
    x = rng.normal(size=(5, 4))
    y = rng.integers(0, 3, size=5)
    _, grads = training_loss_and_gradients(model, x, y)

    step = 1e-4
    worst = 0.0
    for name, grad in grads.items():
        flat_grad = grad.ravel()
        flat_param = model.params[name].ravel()
        for i in range(flat_param.size):
            original = flat_param[i]
            flat_param[i] = original + step
            plus = training_loss(model, x, y)
            flat_param[i] = original - step
            minus = training_loss(model, x, y)
            flat_param[i] = original
            numeric = (plus - minus) / (2 * step)
            scale = max(abs(numeric), abs(flat_grad[i]), 1e-8)
            worst = max(worst, abs(numeric - flat_grad[i]) / scale)
    _criterion(
        "gradient check",
        worst < 1e-4,
        f"1 stage, 2 layers, width 4, 5 frames; max relative error {worst:.2e}",
    )


def test_small_separable_dataset_trains_quickly():
    rng = np.random.default_rng(99)
    means = rng.normal(size=(3, 8)) * 3.0
    dataset = []
    for _ in range(20):
        cuts = np.sort(rng.choice(np.arange(10, 90), size=2, replace=False))
        labels = np.zeros(100, dtype=int)
        labels[int(cuts[0]):int(cuts[1])] = 1
        labels[int(cuts[1]):] = 2
        features = means[labels] + rng.normal(size=(100, 8)) * 0.4
        dataset.append((features, labels))

    config = CausalTcnConfig(
        input_dim=8, num_classes=3, num_stages=2, layers_per_stage=4, hidden_dim=16
    )
    model = init_model(config, seed=7)

    started = time.perf_counter()
    steps_used = 0
    accuracy = 0.0
    while steps_used < 2000:
        result = train(model, dataset, steps=250, learning_rate=5e-3)
        model = result.model
        steps_used += 250
        correct = total = 0
        for features, labels in dataset:
            predicted = predict_labels(model, features)
            correct += int((predicted == labels).sum())
            total += len(labels)
        accuracy = correct / total
        if accuracy > 0.9:
            break
    elapsed = time.perf_counter() - started
    _criterion(
        "desk-scale learning",
        accuracy > 0.9 and steps_used <= 2000 and elapsed < 60.0,
        f"frame accuracy {accuracy:.3f} after {steps_used} steps in {elapsed:.1f}s",
    )


# -- tag mapping -------------------------------------------------------------


def test_declared_mappings_project_one_hot_rows_exactly():
    rng = np.random.default_rng(5)
    slots = [label[2:] for label in TARGET_LABELS if label.startswith("B-")]
    rows_checked = 0
    spurious = 0
    declared_misses = 0
    for _ in range(50):
        n_roles = int(rng.integers(1, 7))
        source_labels = ["O"]
        pairs = []
        for role in range(n_roles):
            source_labels += [f"B-R{role}", f"I-R{role}"]
            if rng.random() < 0.75:  # leave some roles undeclared
                slot = slots[int(rng.integers(len(slots)))]
                pairs.append((f"B-R{role}", f"B-{slot}"))
                pairs.append((f"I-R{role}", f"I-{slot}"))
        mapping = build_mapping(pairs, source_labels)

        for source, target in pairs:
            if mapping.target_for(source) != target:
                declared_misses += 1

        projected = apply_mapping(mapping, np.eye(len(source_labels)))
        for source, row in zip(source_labels, projected):
            rows_checked += 1
            hot = int(np.argmax(row))
            if (
                int(np.count_nonzero(row)) != 1
                or row[hot] != 1.0
                or TARGET_LABELS[hot] != mapping.target_for(source)
            ):
                spurious += 1
    _criterion(
        "mapping-layer exactness",
        spurious == 0 and declared_misses == 0,
        f"{rows_checked} one-hot rows over 50 declared mapping sets",
    )


# -- summarization metric ----------------------------------------------------


def test_rouge_matches_hand_computed_table():
    cases = 0
    worst = 0.0
    for _, candidate, reference, r1, r2, rl in ROUGE_FIXTURE:
        cases += 1
        computed = (
            (rouge_n(candidate, reference, 1), r1),
            (rouge_n(candidate, reference, 2), r2),
            (rouge_l(candidate, reference), rl),
        )
        for score, (precision, recall, f1) in computed:
            worst = max(
                worst,
                abs(score.precision - precision),
                abs(score.recall - recall),
                abs(score.f1 - f1),
            )
    _criterion(
        "ROUGE oracle",
        cases == 10 and worst < 1e-9,
        f"{cases} hand-computed cases, max deviation {worst:.1e}",
    )


# -- session protocol --------------------------------------------------------


def _item_vec(session, item: int) -> np.ndarray:
    return fallback_embed_text(
        session.spec.items[item].text, session.config.encoder_dim
    )


def _scripted_sessions():
    """Five recorded sessions spanning all modes and most of the event kinds."""
    engine = SessionEngine()
    engine.add_spec(load_spec(rice_spec_document()))
    out = []

    # 1: post-hoc review, wizard narrating the controls
    s = engine.create_session(
        "post-hoc", "cook-rice", config=SessionConfig(encoder_dim=16)
    )
    s.connect("wizard", t_ms=0)
    s.connect("performer", t_ms=0)
    s.ingest_narration(TranscriptChunk(0, "I wash the rice", 0, 1100))
    s.ingest_frame_embedding(1200, _item_vec(s, 0))
    s.wizard_act(1300, WizardAction.select_utterance("ack-ok"))
    s.wizard_act(1400, WizardAction.video_control("pause"))
    s.ingest_narration(
        TranscriptChunk(1, "I rinse it with cold water until it runs clear", 1500, 2600)
    )
    s.wizard_act(2700, WizardAction.video_control("play"))
    s.wizard_act(2800, WizardAction.confirm_item(0))
    s.disconnect("performer", t_ms=2900)
    s.disconnect("wizard", t_ms=3000)
    out.append((engine, s, None))

    # 2: live annotation with an auto prompt and edited questions
    s = engine.create_session(
        "during",
        "cook-rice",
        config=SessionConfig(
            encoder_dim=16,
            auto_prompts=("Please describe what you are doing.",),
        ),
    )
    s.connect("performer", t_ms=0)
    s.connect("wizard", t_ms=0)
    s.ingest_narration(TranscriptChunk(0, "I boil the rice", 0, 900))
    s.wizard_act(1000, WizardAction.ask_question("What pot is that?", slot="Tool"))
    s.ingest_narration(TranscriptChunk(1, "I boil it in the small pot", 1100, 2000))
    s.wizard_act(
        2100,
        WizardAction.edit_question(
            provenance="Extent-1", text="Until when does it boil?", slot="Extent"
        ),
    )
    s.ingest_frame_embedding(2200, _item_vec(s, 1))
    s.ingest_frame_embedding(3300, _item_vec(s, 1))
    s.wizard_act(3400, WizardAction.free_text("Thanks, keep going."))
    s.wizard_act(3500, WizardAction.note("performer skipped the lid"))
    out.append((engine, s, None))

    # 3: guidance mode, estimates streaming back to the performer
    s = engine.create_session(
        "guidance",
        "cook-rice",
        config=SessionConfig(encoder_dim=16, window_ms=2000, cadence_ms=500),
    )
    s.connect("performer", t_ms=0)
    s.connect("wizard", t_ms=0)
    for step, t_ms in enumerate(range(500, 4001, 500)):
        s.ingest_frame_embedding(t_ms, _item_vec(s, min(step // 3, 2)))
    s.wizard_act(4100, WizardAction.select_utterance("prompt-continue"))
    s.wizard_act(4200, WizardAction.confirm_item(2))
    out.append((engine, s, None))

    # 4: live annotation with an action segmenter attached
    segmenter = init_model(
        CausalTcnConfig(
            input_dim=16, num_classes=3, num_stages=1, layers_per_stage=2, hidden_dim=8
        ),
        seed=21,
    )
    s = engine.create_session(
        "during",
        "cook-rice",
        config=SessionConfig(encoder_dim=16),
        segmenter_model=segmenter,
    )
    s.connect("performer", t_ms=0)
    s.connect("wizard", t_ms=0)
    s.ingest_frame_embedding(400, _item_vec(s, 0))
    s.ingest_narration(TranscriptChunk(0, "I serve the rice on a plate", 500, 1400))
    s.ingest_frame_embedding(1500, _item_vec(s, 2))
    s.wizard_act(1600, WizardAction.select_utterance("ack-ok"))
    s.disconnect("wizard", t_ms=1700)
    s.connect("wizard", t_ms=1800)  # reconnect mid-session
    s.wizard_act(1900, WizardAction.video_control("rewind"))
    out.append((engine, s, segmenter))

    # 5: guidance run that leans on suggestions with a tighter slot contract
    s = engine.create_session(
        "guidance",
        "cook-rice",
        config=SessionConfig(
            encoder_dim=16,
            required_slots=("Action", "Receiver", "Location"),
            suggestion_limit=1,
            auto_prompts=("Hello.", "Start when ready."),
        ),
    )
    s.connect("performer", t_ms=0)
    s.connect("wizard", t_ms=0)
    s.ingest_narration(TranscriptChunk(0, "I stir", 0, 700))
    s.ingest_narration(TranscriptChunk(1, "I stir the rice in the pot", 800, 1800))
    s.wizard_act(1900, WizardAction.ask_question("Where exactly?", slot="Location"))
    s.wizard_act(2000, WizardAction.confirm_item(1))
    s.close()
    out.append((engine, s, None))

    return out


def test_recorded_sessions_replay_bitwise():
    sessions = _scripted_sessions()
    modes = {session.mode for _, session, _ in sessions}
    replayed_ok = 0
    for engine, session, segmenter in sessions:
        recorded = [e.to_line() for e in session.log.derived_events()]
        replayed = [
            e.to_line()
            for e in engine.replay_log(session.log, segmenter_model=segmenter)
        ]
        if replayed == recorded and len(recorded) > 0:
            replayed_ok += 1
    _criterion(
        "replay determinism",
        len(sessions) >= 5
        and modes == {"post-hoc", "during", "guidance"}
        and replayed_ok == len(sessions),
        f"{replayed_ok}/{len(sessions)} sessions bitwise-identical, all modes",
    )


def test_no_system_utterance_without_a_wizard_or_auto_prompt_source():
    total_tts = 0
    total_speech = 0
    total_auto = 0
    violations = 0
    for _, session, _ in _scripted_sessions():
        events = session.log.events
        tts = [e for e in events if e.kind == "tts-request"]
        speech = [
            e for e in events if e.kind in ("wizard-utterance", "question-asked")
        ]
        total_tts += len(tts)
        total_speech += len(speech)
        total_auto += len(session.config.auto_prompts)

        wizard_sourced = set()
        for event in tts:
            if not event_visible_to(event, "performer", session.mode):
                violations += 1
            source = event.payload["source"]
            if source == "auto-prompt":
                if event.payload["source_seq"] is not None:
                    violations += 1
            elif source == "wizard":
                origin = events[event.payload["source_seq"]]
                if origin.actor != "wizard" or origin.payload["text"] != event.payload["text"]:
                    violations += 1
                wizard_sourced.add(event.payload["source_seq"])
            else:
                violations += 1
        if wizard_sourced != {e.seq for e in speech}:
            violations += 1
    _criterion(
        "wizard-of-oz fidelity",
        violations == 0 and total_tts == total_speech + total_auto,
        f"{total_tts} spoken = {total_speech} wizard + {total_auto} auto-prompt",
    )
