# ====================================================================================================
# P00_set_packages.py
# ----------------------------------------------------------------------------------------------------
# Centralized import file that sets up all global packages used across the project.
# Ensures consistent imports and prevents duplication across modules.
# Optimized for Make + trace analysis (graphs, diffs, subprocess-driven builds).
# ====================================================================================================


# ----------------------------------------------------------------------------------------------------
# --- Standard library imports (no installation required) ---
# ----------------------------------------------------------------------------------------------------
import os                                                       # OS-level operations (paths, environment variables)
import re                                                       # Regular expressions for pattern matching
import sys                                                      # Access system-specific parameters, e.g., sys.path
import ast                                                      # Safe literal parsing (strace quoted strings)
import json                                                     # Read/write JSON (graph records, stored reports)
import time                                                     # Time utilities (timestamps, timing performance)
import shlex                                                    # Shell-style splitting/joining of recipe commands
import shutil                                                   # File operations: copy trees, which()
import fnmatch                                                  # Glob matching for exclude patterns
import hashlib                                                  # sha-256 digests of canonical recipes
import contextlib                                               # Manage temporary context scopes (e.g., suppress)
import logging                                                  # Standard logging for info/warning/error tracking
import platform                                                 # Kernel/machine details for OS detection
import difflib                                                  # Unified diffs (fixture commit generation)
import random                                                   # Seeded generators for property suites
import itertools                                                # Counters and chaining over event streams
import posixpath                                                # Lexical, forward-slash path normalization
import tempfile                                                 # Temp files for atomic writes and scratch copies
import subprocess                                               # Run make / strace / git
from functools import lru_cache                                  # Memoization (root alias resolution)
from enum import Enum                                           # Closed sets of kinds (graph kind, provenance, ...)
from pathlib import Path                                        # Cross-platform, object-oriented path handling
from types import MappingProxyType                              # Read-only views for immutable graph nodes
from collections import Counter, defaultdict, deque             # Counters for stats, grouping, BFS queues
from dataclasses import dataclass, field, replace               # Lightweight value classes
from typing import Iterable, Iterator, Mapping, Optional, Protocol, Sequence

# ----------------------------------------------------------------------------------------------------
# --- Third-party imports (require installation via pip) ---
# ----------------------------------------------------------------------------------------------------
import click                                                    # (pip install click) Command-line interface
import networkx as nx                                           # (pip install networkx) DAG checks, reachability
import tomlkit                                                  # (pip install tomlkit) depsentry.toml parsing
import more_itertools                                           # (pip install more-itertools) grouping helpers
from dotenv import dotenv_values                               # (pip install python-dotenv) .env support
from filelock import FileLock, Timeout                          # (pip install filelock) one check per store
from sortedcontainers import SortedList                        # (pip install sortedcontainers) findings kept in order
from unidiff import PatchSet                                    # (pip install unidiff) unified diff parsing
from unidiff.errors import UnidiffParseError


# ----------------------------------------------------------------------------------------------------
# Logging configuration (used throughout the project)
# ----------------------------------------------------------------------------------------------------
# Records go to stderr; stdout is reserved for reports.
logging.basicConfig(
    level=logging.INFO,                                         # Default level: INFO (change to DEBUG for verbose)
    format="%(asctime)s | %(levelname)-8s | %(message)s",        # Timestamp + level + message layout
    datefmt="%Y-%m-%d %H:%M:%S"                                 # Standard timestamp format
)
