use std::path::PathBuf;

use crate::args::{Cli, Command, Common};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Simulate,
    Optimize,
    Gradcheck,
    Compare,
}

/// Where the starting control comes from. `Default` is the linear ramp.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamsSource {
    File(PathBuf),
    Ramp,
    Default,
}

/// Everything a run needs, resolved from the command line.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: CommandKind,
    pub config_path: PathBuf,
    pub out_dir: PathBuf,
    pub overrides: Vec<String>,
    pub force: bool,
    pub params: ParamsSource,
    pub fixed_grid: bool,
    pub max_iters: Option<usize>,
    pub perturb_gradient: bool,
}

fn source(params: Option<PathBuf>, ramp: bool) -> ParamsSource {
    match (params, ramp) {
        (Some(p), _) => ParamsSource::File(p),
        (None, true) => ParamsSource::Ramp,
        (None, false) => ParamsSource::Default,
    }
}

impl RunManifest {
    fn base(command: CommandKind, common: Common, params: ParamsSource) -> Self {
        RunManifest {
            command,
            config_path: common.config,
            out_dir: common.out_dir,
            overrides: common.overrides,
            force: common.force,
            params,
            fixed_grid: false,
            max_iters: None,
            perturb_gradient: false,
        }
    }
}

impl From<Cli> for RunManifest {
    fn from(cli: Cli) -> Self {
        match cli.command {
            Command::Simulate { common, source: s } => {
                RunManifest::base(CommandKind::Simulate, common, source(s.params, s.ramp))
            }
            Command::Optimize {
                common,
                source: s,
                fixed_grid,
                max_iters,
            } => RunManifest {
                fixed_grid,
                max_iters,
                ..RunManifest::base(CommandKind::Optimize, common, source(s.params, s.ramp))
            },
            Command::Gradcheck {
                common,
                source: s,
                perturb_gradient,
            } => RunManifest {
                perturb_gradient,
                ..RunManifest::base(CommandKind::Gradcheck, common, source(s.params, s.ramp))
            },
            Command::Compare {
                common,
                source: s,
                max_iters,
            } => RunManifest {
                max_iters,
                ..RunManifest::base(CommandKind::Compare, common, source(s.params, s.ramp))
            },
        }
    }
}
