import pytest

from main import build_parser
from src.config import build_run_config, load_config, parse_roi
from src.errors import EmptyInput, InvalidParameter, MissingInput
from src.models import TemporalSegment
from src.storage import save_segments

_ENV = (
    "EVLIVE_TAU_MS",
    "EVLIVE_DT_MS",
    "EVLIVE_WINDOW_MS",
    "EVLIVE_SAE_TAU_MS",
    "EVLIVE_SEED",
    "EVLIVE_STRICT_PARSE",
    "EVLIVE_WORKERS",
    "EVLIVE_LOG_LEVEL",
    "EVLIVE_ANNOTATION_MARGIN_MS",
)


@pytest.fixture
def clean_env(monkeypatch, tmp_path):
    # `load_dotenv()` reads a `.env` from the working directory; run from an
    # empty one. The setenv/delenv pair registers every variable with
    # monkeypatch so values loaded from a `.env` are undone too.
    for name in _ENV:
        monkeypatch.setenv(name, "")
        monkeypatch.delenv(name)
    monkeypatch.chdir(tmp_path)
    return monkeypatch


def test_load_config_defaults(clean_env) -> None:
    config = load_config()
    assert (config.tau_ms, config.dt_ms, config.window_ms) == (10.0, 2.0, 33.0)
    assert config.sae_tau_ms == 66.0
    assert config.seed == 0
    assert config.strict_parse is True
    assert config.workers == 4
    assert config.log_level == "WARNING"


def test_load_config_reads_environment(clean_env) -> None:
    clean_env.setenv("EVLIVE_TAU_MS", "12.5")
    clean_env.setenv("EVLIVE_STRICT_PARSE", "off")
    clean_env.setenv("EVLIVE_WORKERS", "2")
    clean_env.setenv("EVLIVE_LOG_LEVEL", "debug")
    config = load_config()
    assert config.tau_ms == 12.5
    assert config.strict_parse is False
    assert config.workers == 2
    assert config.log_level == "DEBUG"


def test_load_config_reads_dotenv_file(clean_env, tmp_path) -> None:
    (tmp_path / ".env").write_text("EVLIVE_DT_MS=4\n")
    assert load_config().dt_ms == 4.0


def test_invalid_environment_values_name_the_variable(clean_env) -> None:
    clean_env.setenv("EVLIVE_WINDOW_MS", "-3")
    with pytest.raises(ValueError, match="EVLIVE_WINDOW_MS"):
        load_config()
    clean_env.setenv("EVLIVE_WINDOW_MS", "33")
    clean_env.setenv("EVLIVE_WORKERS", "many")
    with pytest.raises(ValueError, match="EVLIVE_WORKERS"):
        load_config()


def test_unknown_boolean_falls_back_to_default(clean_env) -> None:
    clean_env.setenv("EVLIVE_STRICT_PARSE", "maybe")
    assert load_config().strict_parse is True


def test_run_config_converts_ms_to_us(clean_env, tmp_path) -> None:
    clip = tmp_path / "clip.evt"
    clip.write_bytes(b"")
    args = build_parser().parse_args(
        ["detect", "--input", str(clip), "--roi", "1,2,3,4,left_eye", "--tau-ms", "5", "--dt-ms", "0.5"]
    )
    run = build_run_config(args, load_config())
    assert run.tau_us == 5_000
    assert run.dt_us == 500
    assert run.window_us == 33_000
    assert run.roi.label == "left_eye"
    assert (run.roi.x0, run.roi.y0, run.roi.w, run.roi.h) == (1, 2, 3, 4)


def test_run_config_validates_input_paths(clean_env, tmp_path) -> None:
    args = build_parser().parse_args(["detect", "--input", str(tmp_path / "missing.evt")])
    with pytest.raises(MissingInput):
        build_run_config(args, load_config())


def test_lenient_flag_disables_strict_parsing(clean_env, tmp_path) -> None:
    clip = tmp_path / "clip.csv"
    clip.write_text("t_us,x,y,p\n")
    args = build_parser().parse_args(["convert", "-i", str(clip), "-o", str(tmp_path / "out.evt"), "--lenient"])
    assert build_run_config(args, load_config()).strict is False


def _detect_args(tmp_path, *extra: str):
    clip = tmp_path / "clip.evt"
    clip.write_bytes(b"")
    return build_parser().parse_args(["detect", "--input", str(clip), "--roi", "0,0,4,4", *extra])


def test_blink_window_fitted_from_annotations(clean_env, tmp_path) -> None:
    truth = tmp_path / "truth.json"
    segments = [
        TemporalSegment(onset=k * 200_000, offset=k * 200_000 + k * 1_000, label="blink")
        for k in range(1, 101)
    ]
    segments.append(TemporalSegment(onset=30_000_000, offset=30_900_000, label="saccade"))
    save_segments(truth, segments)
    run = build_run_config(_detect_args(tmp_path, "--fit-blink-window", str(truth)), load_config())
    assert run.blink_params.search_window == 95_050


def test_blink_window_fit_needs_blinks(clean_env, tmp_path) -> None:
    truth = tmp_path / "truth.json"
    save_segments(truth, [TemporalSegment(onset=0, offset=50_000, label="saccade")])
    with pytest.raises(EmptyInput):
        build_run_config(_detect_args(tmp_path, "--fit-blink-window", str(truth)), load_config())


def test_blink_window_options_are_exclusive(clean_env, tmp_path) -> None:
    with pytest.raises(SystemExit):
        _detect_args(tmp_path, "--fit-blink-window", "truth.json", "--search-window-ms", "250")


def test_parse_roi_forms(tmp_path) -> None:
    assert parse_roi(None) is None
    assert parse_roi("0,0,4,4").label == "custom"
    roi_file = tmp_path / "roi.json"
    roi_file.write_text('{"x0": 1, "y0": 1, "w": 2, "h": 2, "label": "face"}')
    assert parse_roi(str(roi_file)).label == "face"
    with pytest.raises(InvalidParameter):
        parse_roi("1,2,3")
    with pytest.raises(InvalidParameter):
        parse_roi("a,b,c,d")
