"""End-to-end identification: generate, train a small CNN, evaluate.

Desk-sized on purpose (5 devices, 160 packets each, a few epochs); expect
roughly a minute of training and an accuracy well above chance.

Run:  python3 demos/04_train_and_identify.py
"""
import os

from lorarffi import (
    CaptureSchedule,
    DatasetReader,
    LoRaParams,
    TrainConfig,
    evaluate,
    generate_dataset,
    load_checkpoint,
    sample_profiles,
    save_checkpoint,
    test_selection,
    train_on_dataset,
)

params = LoRaParams(sf=7, bw=125e3, fc=868.1e6, ts=4e-6, n_preambles=4)
fleet = sample_profiles(5, params, seed=8)
schedule = CaptureSchedule(sessions=(1,), packets_per_session=160, interval_s=2.0, snr_db=30.0)

dataset = "/tmp/demo_train.lds"
checkpoint = "/tmp/demo_train.lck"
generate_dataset(params, fleet, schedule, master_seed=8, path=dataset)
print(f"dataset: {os.path.getsize(dataset)} bytes")

with DatasetReader(dataset) as reader:
    result, train_idx = train_on_dataset(
        reader,
        representation="spectrogram",
        compensate=True,
        cfg=TrainConfig(epochs=12, seed=0),
        session=1,
        train_count=80,
        window_len=128,
        hop=64,
        verbose=True,
    )
    save_checkpoint(
        checkpoint, result.model, result.cfo_database, "spectrogram", True, reader.params,
        extra={"train_session": 1, "train_count": 80, "window_len": 128, "hop": 64},
    )
    model, db, header = load_checkpoint(checkpoint)
    report = evaluate(model, db, header, reader, test_selection(reader, 1, 80))

print()
print(report.to_text())
