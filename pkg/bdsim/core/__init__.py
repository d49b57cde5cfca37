"""
Configuration, errors, validation and provenance shared by every bdsim layer.

Nothing here imports the simulation packages at module level except the rule
parser used by config validation.
"""
