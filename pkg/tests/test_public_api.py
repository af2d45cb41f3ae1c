import inspect
from importlib import metadata

import strokecast


def test_runtime_version_matches_distribution_metadata():
    assert strokecast.__version__ == metadata.version("strokecast")


def test_every_exported_name_resolves():
    for name in strokecast.__all__:
        assert getattr(strokecast, name) is not None


def test_top_level_classify_writer_exports_classifier_interface():
    signature = inspect.signature(strokecast.classify_writer)

    assert strokecast.classify_writer.__module__ == "strokecast.classifier"
    assert "channel" in signature.parameters
    assert "session_strategy" in signature.parameters
    assert "bank" in signature.parameters
    assert signature.parameters["bank"].kind is inspect.Parameter.KEYWORD_ONLY


def test_top_level_run_experiment_exports_application_interface():
    signature = inspect.signature(strokecast.run_experiment)

    assert strokecast.run_experiment.__module__ == "strokecast.application.experiment"
    assert list(signature.parameters) == ["cfg", "ds", "progress"]


def test_console_entry_point_targets_cli_main():
    entry_points = metadata.entry_points(group="console_scripts")
    targets = {ep.name: ep.value for ep in entry_points if ep.name == "strokecast"}

    assert targets == {"strokecast": "strokecast.cli.strokecast_cli:main"}


def test_loggers_are_module_private():
    import strokecast.constants
    import strokecast.svc_io

    assert not hasattr(strokecast.constants, "logger")
    assert strokecast.svc_io._logger.name == "strokecast.svc_io"
