from .local_search import SearchConfig, construct, improve, solve

__all__ = ["SearchConfig", "construct", "improve", "solve"]
