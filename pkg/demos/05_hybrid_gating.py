"""Why the CFO gate exists: two devices with identical analog fingerprints.

After compensation the CNN cannot tell impairment-identical twins apart, but
their oscillators sit kilohertz apart, so gating the softmax by reference CFO
resolves them. With lambda = infinity the gate is a no-op and the hybrid
result collapses back to the plain CNN.

Run:  python3 demos/05_hybrid_gating.py
"""
from lorarffi import (
    CaptureSchedule,
    DatasetReader,
    DeviceProfile,
    LoRaParams,
    TrainConfig,
    evaluate,
    generate_dataset,
    load_checkpoint,
    save_checkpoint,
    test_selection,
    train_on_dataset,
)

params = LoRaParams(sf=7, bw=125e3, fc=868.1e6, ts=4e-6, n_preambles=4)
fingerprint = dict(iq_gain_mismatch=1.08, iq_phase_error=0.05, pa_a1=1.0, pa_a3=-0.12)
quiet = dict(cfo_warmup_amp=0.0, cfo_day_sigma=0.0, cfo_jitter_sigma=5.0)
twins = [
    DeviceProfile(device_id=1, cfo_base=-2500.0, **quiet, **fingerprint),
    DeviceProfile(device_id=2, cfo_base=2500.0, **quiet, **fingerprint),
]
schedule = CaptureSchedule(sessions=(1,), packets_per_session=160, interval_s=2.0, snr_db=30.0)

dataset, checkpoint = "/tmp/demo_twins.lds", "/tmp/demo_twins.lck"
generate_dataset(params, twins, schedule, master_seed=5, path=dataset)

with DatasetReader(dataset) as reader:
    result, _ = train_on_dataset(
        reader, "spectrogram", True, TrainConfig(epochs=6, seed=0),
        session=1, train_count=80, window_len=128, hop=64,
    )
    save_checkpoint(
        checkpoint, result.model, result.cfo_database, "spectrogram", True, reader.params,
        extra={"train_session": 1, "train_count": 80, "window_len": 128, "hop": 64},
    )
    model, db, header = load_checkpoint(checkpoint)
    print("reference CFOs:", {k: round(v, 1) for k, v in db.references.items()},
          f"(gate threshold {db.threshold:.0f} Hz)\n")

    test = test_selection(reader, 1, 80)
    for label, kwargs in (
        ("cnn only          ", dict(classifier="cnn")),
        ("hybrid, lambda=200", dict(classifier="hybrid")),
        ("hybrid, lambda=inf", dict(classifier="hybrid", lambda_hz=float("inf"))),
    ):
        acc = evaluate(model, db, header, reader, test, **kwargs).accuracy
        print(f"  {label}: accuracy {acc:.4f}")
