"""Infrastructure layer: environment-driven settings.

    ```python
    from strokecast.infrastructure.settings import STROKECAST_WORKERS
    ```
"""
