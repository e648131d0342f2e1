"""Transfer-window decision engine.

Squad selection under a chance-constrained budget, plus a competitive
bidding model for individual sales, exposed through a FastAPI service and
a thin command-line client.
"""

__version__ = "0.1.0"
