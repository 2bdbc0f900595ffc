"""mcqforge: human-in-the-loop MCQ generation, linting, and banking."""

__version__ = "0.1.0"
