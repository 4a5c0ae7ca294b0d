"""Event extraction as machine reading comprehension.

Event detection is posed as textual entailment over generated statements and
argument detection as extractive question answering over generated questions.
"""

__version__ = "0.1.0"
