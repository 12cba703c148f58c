"""dorasim: a neuro-symbolic relational mapping engine with a constituency
formalism for structure-dependent language.

The package couples a layered unit network that binds roles to fillers by
firing time with a chart-parsing formalism whose per-level time patterns
supply structural ground truth for evaluating learned mappings.
"""

__version__ = "0.1.0"
