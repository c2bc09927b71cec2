# ====================================================================================================
# P07_module_configs.py
# ----------------------------------------------------------------------------------------------------
# Purpose:
#   Builds the run configuration used by every command.
# ----------------------------------------------------------------------------------------------------
# Precedence (lowest → highest):
#   1. Module defaults below
#   2. <project>/.env, then the process environment (DEPSENTRY_STORE, DEPSENTRY_REPLAY)
#   3. <project>/depsentry.toml  (plain `key = value` lines)
#   4. Command-line flags
# ----------------------------------------------------------------------------------------------------
# Example depsentry.toml:
#   make_args       = ["-j1", "CC=gcc"]
#   exclude_globs   = ["tests/*", "*.pc"]
#   source_suffixes = [".c", ".cc"]
#   compiler        = "gcc"
# ----------------------------------------------------------------------------------------------------
# Safety:
#   - Unknown keys are reported and ignored; values of the wrong type raise ConfigError.
# ====================================================================================================

# ----------------------------------------------------------------------------------------------------
# Import Libraries required to adjust sys path
# ----------------------------------------------------------------------------------------------------
import sys                      # Provides access to system-level parameters and functions
from pathlib import Path        # Provides object-oriented interface for filesystem paths

# Add parent directory to system path to allow imports from `processes/`
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))
sys.dont_write_bytecode = True  # Prevents creation of __pycache__ directories

# Import shared project packages (declared centrally in P00_set_packages.py)
from processes.P00_set_packages import *
from processes.P01_set_file_paths import DEFAULT_STORE_NAME, STORE_ENV_VAR, StorePaths, store_paths
from processes.P02_system_processes import ReplayDir
from processes.P04_static_lists import DEFAULT_HEADER_SUFFIXES, DEFAULT_SOURCE_SUFFIXES
from processes.P05_exceptions import ConfigError

logger = logging.getLogger(__name__)

CONFIG_FILE_NAME = "depsentry.toml"
DOTENV_FILE_NAME = ".env"
REPLAY_ENV_VAR = "DEPSENTRY_REPLAY"


class VcsMode(Enum):
    GIT_COMMIT = "GitCommit"        # git diff <stored>..<commit>, then git checkout <commit>
    DIFF_FILE = "DiffFile"          # diff supplied with --diff; tree already at the commit
    PRE_APPLIED = "PreApplied"      # tree already at the commit; diff from replay or empty


class TracingMode(Enum):
    LIVE = "Live"
    REPLAY = "Replay"


# Expected type per depsentry.toml key.
_LIST_KEYS = ("make_args", "exclude_globs", "source_suffixes", "header_suffixes")
_STR_KEYS = ("store_dir", "replay_dir", "compiler", "vcs_mode")
_BOOL_KEYS = ("skip_irrelevant",)


@dataclass(frozen=True)
class Config:
    project_root: Path
    store_dir: Path
    make_args: tuple = ()
    exclude_globs: tuple = ()
    source_suffixes: tuple = DEFAULT_SOURCE_SUFFIXES
    header_suffixes: tuple = DEFAULT_HEADER_SUFFIXES
    replay_dir: Optional[Path] = None
    vcs_mode: VcsMode = VcsMode.PRE_APPLIED
    compiler: Optional[str] = None
    skip_irrelevant: bool = False

    @property
    def tracing_mode(self) -> TracingMode:
        return TracingMode.REPLAY if self.replay_dir is not None else TracingMode.LIVE

    @property
    def store(self) -> StorePaths:
        return store_paths(self.store_dir)

    @property
    def replay(self) -> Optional[ReplayDir]:
        return ReplayDir(self.replay_dir) if self.replay_dir is not None else None


def _as_path(value: str, base: Path) -> Path:
    path = Path(value).expanduser()
    return path if path.is_absolute() else (base / path)


def _read_toml(path: Path) -> dict:
    if not path.is_file():
        return {}
    try:
        document = tomlkit.parse(path.read_text(encoding="utf-8"))
    except tomlkit.exceptions.TOMLKitError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    values = {}
    for key, value in document.unwrap().items():
        if key in _LIST_KEYS:
            if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
                raise ConfigError(f"{path}: {key} must be a list of strings")
            values[key] = tuple(value)
        elif key in _STR_KEYS:
            if not isinstance(value, str):
                raise ConfigError(f"{path}: {key} must be a string")
            values[key] = value
        elif key in _BOOL_KEYS:
            if not isinstance(value, bool):
                raise ConfigError(f"{path}: {key} must be true or false")
            values[key] = value
        else:
            logger.warning("⚠️ %s: unknown key %r ignored", path.name, key)
    return values


# ----------------------------------------------------------------------------------------------------
# load_config()
# ----------------------------------------------------------------------------------------------------
def load_config(project_root, overrides: Optional[Mapping] = None) -> Config:
    """
    Resolve the configuration for one project.

    Args:
        project_root (str | Path): The project directory (must exist).
        overrides (Mapping, optional): Command-line values; None entries are ignored.

    Returns:
        Config: Frozen configuration with absolute paths.

    Raises:
        ConfigError: Missing project directory, unreadable depsentry.toml, wrong value types,
            an unknown vcs_mode, or a store path that exists but is not a directory.

    Example:
        >>> cfg = load_config("/repo", {"make_args": ("-j1",)})
        >>> cfg.store_dir
        PosixPath('/repo/.depsentry')
    """
    root = Path(project_root).expanduser().resolve()
    if not root.is_dir():
        raise ConfigError(f"project directory {root} does not exist")

    values = {"store_dir": str(root / DEFAULT_STORE_NAME)}

    environment = {k: v for k, v in dotenv_values(root / DOTENV_FILE_NAME).items() if v is not None}
    environment.update({k: v for k, v in os.environ.items() if k in (STORE_ENV_VAR, REPLAY_ENV_VAR)})
    if environment.get(STORE_ENV_VAR, "").strip():
        values["store_dir"] = environment[STORE_ENV_VAR].strip()
    if environment.get(REPLAY_ENV_VAR, "").strip():
        values["replay_dir"] = environment[REPLAY_ENV_VAR].strip()

    values.update(_read_toml(root / CONFIG_FILE_NAME))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})

    mode = values.get("vcs_mode", VcsMode.PRE_APPLIED)
    try:
        vcs_mode = mode if isinstance(mode, VcsMode) else VcsMode(mode)
    except ValueError as exc:
        raise ConfigError(f"unknown vcs_mode {mode!r}") from exc

    store_dir = _as_path(str(values["store_dir"]), root)
    if store_dir.exists() and not store_dir.is_dir():
        raise ConfigError(f"store path {store_dir} is not a directory")
    replay_dir = _as_path(str(values["replay_dir"]), root) if values.get("replay_dir") else None

    config = Config(
        project_root=root,
        store_dir=store_dir,
        make_args=tuple(values.get("make_args", ())),
        exclude_globs=tuple(values.get("exclude_globs", ())),
        source_suffixes=tuple(values.get("source_suffixes", DEFAULT_SOURCE_SUFFIXES)),
        header_suffixes=tuple(values.get("header_suffixes", DEFAULT_HEADER_SUFFIXES)),
        replay_dir=replay_dir,
        vcs_mode=vcs_mode,
        compiler=values.get("compiler") or None,
        skip_irrelevant=bool(values.get("skip_irrelevant", False)),
    )
    logger.debug("configuration: %s", config)
    return config
