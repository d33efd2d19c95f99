import pytest

from nrmhd.config import RunConfig, RunMode, load_config, parse_config, parse_entries
from nrmhd.errors import ParseError, ValidationError
from nrmhd.spectral import DealiasRule


def field_of(exc_info):
    return exc_info.value.field


class TestParse:
    def test_empty_needs_epsilon(self):
        with pytest.raises(ValidationError) as exc:
            parse_config("")
        assert field_of(exc) == "init.epsilon"

    def test_defaults(self):
        cfg = parse_config("init.epsilon = 0.05\n")
        assert cfg.grid.n == 32
        assert cfg.dynamics.nu == 1.0
        assert cfg.dynamics.dealias is DealiasRule.TWO_THIRDS
        assert not cfg.dynamics.enforce_parity and not cfg.dynamics.spectral_filter
        assert cfg.energy.sigma == 0.5 and cfg.energy.s == 5 and cfg.init.s == 5
        assert cfg.mode is RunMode.SINGLE

    def test_comments_and_lists(self):
        text = """
        # a sweep
        grid.n = 16          # coarse
        run.mode = sweep
        run.epsilons = 0.01, 0.02,0.04
        dynamics.enforce_parity = yes
        """
        cfg = parse_config(text)
        assert cfg.epsilons == (0.01, 0.02, 0.04)
        assert cfg.init.epsilon == 0.01
        assert cfg.dynamics.enforce_parity

    def test_negative_dt(self):
        with pytest.raises(ValidationError) as exc:
            parse_config("init.epsilon = 0.05\ndynamics.dt = -0.1\n")
        assert field_of(exc) == "dynamics.dt"

    def test_sigma_out_of_range(self):
        with pytest.raises(ValidationError) as exc:
            parse_config("init.epsilon = 0.05\nenergy.sigma = 1.5\n")
        assert field_of(exc) == "energy.sigma"

    @pytest.mark.parametrize(
        "text,field",
        [
            ("init.epsilon = -1", "init.epsilon"),
            ("init.epsilon = 0.1\ngrid.n = 10\ninit.k_max = 4", "init.k_max"),
            ("init.epsilon = 0.1\ngrid.n = 9", "grid.n"),
            ("run.mode = sweep", "run.epsilons"),
            ("run.mode = sweep\nrun.epsilons = 0.1, -0.2", "run.epsilons"),
            ("init.epsilon = 0.1\nrun.mode = convergence\nrun.dts = 0.1", "run.dts"),
            ("init.epsilon = 0.1\nrun.mode = bogus", "run.mode"),
            ("init.epsilon = 0.1\ndynamics.dealias = half", "dynamics.dealias"),
            ("init.epsilon = 0.1\nrun.t_end = 0", "run.t_end"),
            ("init.epsilon = 0.1\nrun.snapshot_times = 20", "run.snapshot_times"),
            ("init.epsilon = 0.1\nenergy.sample_stride = 0", "energy.sample_stride"),
        ],
    )
    def test_validation_names_field(self, text, field):
        with pytest.raises(ValidationError) as exc:
            parse_config(text)
        assert field_of(exc) == field
        assert field in str(exc.value)

    @pytest.mark.parametrize(
        "text,line",
        [
            ("init.epsilon = 0.1\nnonsense", 2),
            ("init.epsilon = 0.1\n\nfoo.bar = 1", 3),
            ("grid.n = 16\ngrid.n = 32", 2),
            ("grid.n = sixteen", 1),
            ("dynamics.filter = maybe", 1),
        ],
    )
    def test_parse_error_line(self, text, line):
        with pytest.raises(ParseError) as exc:
            parse_entries(text)
        assert exc.value.line == line
        assert str(exc.value).startswith(f"line {line}:")


class TestRoundtrip:
    def test_text_roundtrip(self):
        text = "grid.n = 16\ninit.epsilon = 0.02\nrun.mode = sweep\nrun.epsilons = 0.01, 0.02\nrun.snapshot_times = 0.5, 1.0\n"
        cfg = parse_config(text)
        again = parse_config(cfg.to_text())
        assert again == cfg
        assert isinstance(again, RunConfig)

    def test_n_steps(self):
        cfg = parse_config("init.epsilon = 0.1\ndynamics.dt = 0.002\nrun.t_end = 10")
        assert cfg.n_steps == 5000

    def test_load(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("init.epsilon = 0.1\n")
        assert load_config(p).init.epsilon == 0.1
