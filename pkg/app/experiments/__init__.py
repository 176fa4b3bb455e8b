"""
Experiments
One registered experiment per CLI subcommand
"""
