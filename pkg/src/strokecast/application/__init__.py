"""Application layer orchestrating Strokecast's experiment protocol.

The application layer combines the algorithm modules (segmentation, SOM
training, classification, statistics) into complete use cases. It never
prints and never draws progress bars; the CLI passes callbacks instead.

Package Organization:
    * **experiment**: seeded train/test splits, multi-trial runs, rate tables

Usage Examples:
    ```python
    from strokecast.application.experiment import ExperimentConfig, run_experiment
    from strokecast.synth import SynthConfig

    cfg = ExperimentConfig(synth=SynthConfig(writers_per_gender=30), train_per_gender=10,
                           test_per_gender=20, trials=2, seed=7)
    result = run_experiment(cfg)
    ```
"""
