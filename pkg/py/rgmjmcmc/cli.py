"""
Command line interface of the rgmjmcmc script: run, enumerate, experiment, metrics.
"""

import os
import argparse

from rgmjmcmc import __version__
from rgmjmcmc.log import get_logger
from rgmjmcmc.errors import RGMJMCMCError
from rgmjmcmc.engine import KERNEL_KINDS
from rgmjmcmc.inference import InferenceConfig
from rgmjmcmc.io import (load_csv, read_config, read_inclusions, write_inclusions, write_table,
                         write_dataset, write_config)
from rgmjmcmc.runner import RunConfig, ESTIMATORS, run
from rgmjmcmc.enumeration import enumerate_posterior
from rgmjmcmc.experiments import (EXPERIMENTS, GroundTruth, compute_metrics, metrics_table,
                                  run_experiment, generate, ground_truth)

#- command line options that override fields of the run section
RUN_OPTIONS = ('data', 'response', 'family', 'threads', 'nproc', 'iterations', 'burn_in',
               'pop_size', 'max_model_size', 'kernel', 'estimator', 'seed', 'out', 'qr_ratio')


def _add_run_options(parser, with_data=True):
    if with_data:
        parser.add_argument('--data', type=str, default=None, required=False,
                            help='input CSV file with a header line')
        parser.add_argument('--response', type=str, default=None, required=False,
                            help='name of the response column')
        parser.add_argument('--family', type=str, default=None, choices=['gaussian', 'binomial'],
                            help='response family')
    parser.add_argument('--threads', type=int, default=None, required=False,
                        help='number of independent lanes T')
    parser.add_argument('--nproc', type=int, default=None, required=False,
                        help='number of processes running the lanes')
    parser.add_argument('--iterations', type=int, default=None, required=False,
                        help='number of steps per lane')
    parser.add_argument('--burn-in', type=float, default=None, required=False,
                        help='fraction of the steps not counted in frequency estimates')
    parser.add_argument('--pop-size', type=int, default=None, required=False,
                        help='population size s')
    parser.add_argument('--max-model-size', type=int, default=None, required=False,
                        help='maximal number of features in a model Q')
    parser.add_argument('--kernel', type=str, default=None, choices=KERNEL_KINDS,
                        help='chain kernel')
    parser.add_argument('--estimator', type=str, default=None, choices=ESTIMATORS,
                        help='posterior estimator(s)')
    parser.add_argument('--qr-ratio', type=str, default=None, choices=['hamming', 'exact'],
                        help='randomization ratio in the acceptance probability')
    parser.add_argument('--seed', type=int, default=None, required=False,
                        help='master seed, lane seeds derive from it')
    parser.add_argument('-o', '--out', type=str, default=None, required=False,
                        help='output directory')


def get_parser():
    """Define options and defaults of all subcommands."""
    parser = argparse.ArgumentParser(formatter_class=argparse.ArgumentDefaultsHelpFormatter,
                                     description="""Bayesian model selection over generated features""")
    parser.add_argument('--loglevel', type=str, default=None, required=False,
                        help='DEBUG, INFO, WARNING or ERROR, default from $RGMJMCMC_LOGLEVEL')
    subparsers = parser.add_subparsers(dest='command', metavar='command')
    subparsers.required = True

    p = subparsers.add_parser('run', formatter_class=argparse.ArgumentDefaultsHelpFormatter,
                              help='sample the model posterior of a CSV data set')
    p.add_argument('-c', '--config', type=str, default=None, required=False,
                   help='YAML configuration file (sections run, operators, local, inference), '
                   'options given on the command line override it')
    _add_run_options(p)

    p = subparsers.add_parser('enumerate', formatter_class=argparse.ArgumentDefaultsHelpFormatter,
                              help='exact posterior over all models of the covariates')
    p.add_argument('--data', type=str, required=True, help='input CSV file with a header line')
    p.add_argument('--response', type=str, default='y', help='name of the response column')
    p.add_argument('--family', type=str, default='gaussian', choices=['gaussian', 'binomial'],
                   help='response family')
    p.add_argument('--max-model-size', type=int, default=2, help='maximal number of features Q')
    p.add_argument('-c', '--config', type=str, default=None, required=False,
                   help='YAML configuration file, only the inference section is used')
    p.add_argument('-o', '--out', type=str, required=True, help='output CSV file')

    p = subparsers.add_parser('experiment', formatter_class=argparse.ArgumentDefaultsHelpFormatter,
                              help='replicated runs on a synthetic data set with a planted law')
    p.add_argument('name', type=str, choices=EXPERIMENTS, help='experiment')
    p.add_argument('--replicates', type=int, default=1, help='number of replicates')
    p.add_argument('--n', type=int, default=None, help='number of observations, default per experiment')
    p.add_argument('--sigma', type=float, default=None, help='noise level, default per experiment')
    p.add_argument('--threshold', type=float, default=0.5,
                   help='detection threshold on marginal inclusion probabilities')
    _add_run_options(p, with_data=False)

    p = subparsers.add_parser('metrics', formatter_class=argparse.ArgumentDefaultsHelpFormatter,
                              help='power, FP and FDR of saved inclusion probability files')
    p.add_argument('inclusions', type=str, nargs='+',
                   help='inclusion CSV files (one per replicate) with columns FEATURE and PROB')
    p.add_argument('--truth', type=str, nargs='+', default=None,
                   help='true features as canonical keys, key1,key2 for any-of sets')
    p.add_argument('--experiment', type=str, default=None, choices=EXPERIMENTS,
                   help='use the ground truth of this experiment')
    p.add_argument('--threshold', type=float, default=0.5,
                   help='detection threshold on marginal inclusion probabilities')
    p.add_argument('--threads', type=int, default=1, help='number of lanes T, reported only')
    p.add_argument('-o', '--out', type=str, default=None, help='output metrics CSV file')
    return parser


def _override(cfg, args):
    for name in RUN_OPTIONS:
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    return cfg


def _print_metrics(metrics):
    for m in metrics:
        print(' '.join('{}={}'.format(k, v) for k, v in m.row().items()))


def run_command(args):
    log = get_logger()
    sections = read_config(args.config) if args.config is not None else dict()
    cfg = _override(RunConfig.from_dict(sections), args)
    result = run(cfg)
    if result.degraded:
        log.warning('lanes {} failed'.format(result.failed_lanes))
        return 1
    return 0


def enumerate_command(args):
    sections = read_config(args.config) if args.config is not None else dict()
    cfg = InferenceConfig.from_dict(sections.get('inference') or {}).validate()
    dataset = load_csv(args.data, args.response, args.family)
    posterior = enumerate_posterior(dataset.covariates(), args.max_model_size, dataset, cfg)
    posterior.write(args.out)
    return 0


def experiment_command(args):
    log = get_logger()
    cfg = RunConfig.for_experiment(args.name)
    _override(cfg, args)
    metrics, inclusions = run_experiment(args.name, cfg, args.replicates, args.n, args.sigma,
                                         args.threshold)

    if not os.path.isdir(cfg.out):
        os.makedirs(cfg.out)
    for r, inclusion in enumerate(inclusions):
        write_inclusions(inclusion, os.path.join(cfg.out, 'inclusions-{}-rep{}.csv'.format(args.name, r)))
    dataset, _ = generate(args.name, args.n, args.sigma, seed=[cfg.seed, 0])
    write_dataset(dataset, os.path.join(cfg.out, 'data-{}-rep0.csv'.format(args.name)))
    write_table(metrics_table([metrics]), os.path.join(cfg.out, 'metrics-{}.csv'.format(args.name)))
    manifest = cfg.to_dict()
    manifest['result'] = {'version': __version__, 'replicates': metrics.replicates,
                          'degraded': metrics.degraded, 'failed_lanes': metrics.failed_lanes}
    write_config(manifest, os.path.join(cfg.out, 'manifest-{}.yaml'.format(args.name)))
    _print_metrics([metrics])
    log.info('overall power {:.3f} FP {:.3f} FDR {:.3f}'.format(
        metrics.overall_power, metrics.fp, metrics.fdr))
    if metrics.degraded:
        log.warning('lanes {} failed'.format(sorted(metrics.failed_lanes)))
        return 1
    return 0


def metrics_command(args):
    log = get_logger()
    if args.truth is not None:
        truth = GroundTruth.from_strings(args.truth, threshold=args.threshold)
    elif args.experiment is not None:
        truth = ground_truth(args.experiment, args.threshold)
    else:
        log.error('need --truth or --experiment')
        return 2
    inclusions = [read_inclusions(path) for path in args.inclusions]
    metrics = compute_metrics(inclusions, truth, lanes=args.threads)
    if args.out is not None:
        write_table(metrics_table([metrics]), args.out)
    _print_metrics([metrics])
    return 0


COMMANDS = {
    'run': run_command,
    'enumerate': enumerate_command,
    'experiment': experiment_command,
    'metrics': metrics_command,
}


def main(args=None):
    """Entry point of the rgmjmcmc script; returns the exit code."""
    if not isinstance(args, argparse.Namespace):
        args = get_parser().parse_args(args)
    if args.loglevel is not None:
        os.environ['RGMJMCMC_LOGLEVEL'] = args.loglevel.upper()
    log = get_logger()
    try:
        return COMMANDS[args.command](args)
    except (RGMJMCMCError, ValueError, OSError) as err:
        log.error('{}: {}'.format(args.command, err))
        return 1
