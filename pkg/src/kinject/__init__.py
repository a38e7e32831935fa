"""kinject: knowledge-injected response generation for small dialog models.

Generate a draft reply with a tiny recurrent language model, gather
candidate knowledge snippets (model-elicited and retrieved), pick a
relevant-but-diverse subset with a determinantal selector, steer the
decoder's hidden states toward each snippet, and return the
best-ranked rewrite.
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
