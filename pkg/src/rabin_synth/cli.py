"""Command-line entry point.

Subcommands: `demo` (emit the built-in example models), `synth` (exact
synthesis + verification), `learn` (online TD learning), `verify`, and
`simulate`.  Every subcommand is deterministic given its flags and seed;
the default seed can be overridden with the RABIN_SYNTH_SEED environment
variable.

Exit codes: 0 success, 2 parse/spec error, 3 validation error, 4 solver
non-convergence, 5 verification negative (synth only).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import envs, ltl
from .dra import parse_hoa, translate_fragment
from .errors import (AtomMismatchError, ConvergenceError, HoaError,
                     LtlSyntaxError, SchemaError)
from .learner import ExplorationStrategy, LearnerState, run_trials
from .mdp import (deserialize_mdp, policy_from_json, policy_to_json,
                  serialize_mdp, validate_mdp)
from .product import RewardScheme, build_product
from .solver import SolverConfig, value_iteration
from .verify import estimate_satisfaction, satisfies_prob_one, simulate

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_SOLVER = 4
EXIT_UNSAT = 5

DEFAULT_SEED = 12345


def _seed_default():
    return int(os.environ.get("RABIN_SYNTH_SEED", DEFAULT_SEED))


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _load_model(path):
    try:
        with open(path) as fh:
            model = deserialize_mdp(fh.read())
    except OSError as exc:
        raise CliError(f"cannot read model: {exc}", EXIT_PARSE) from exc
    issues = validate_mdp(model)
    if issues:
        listing = "; ".join(str(i) for i in issues[:5])
        raise CliError(f"model invalid: {listing}", EXIT_VALIDATION)
    return model


def _load_dra(args, model):
    if getattr(args, "hoa", None):
        try:
            with open(args.hoa) as fh:
                return parse_hoa(fh.read(), tuple(model.atoms))
        except OSError as exc:
            raise CliError(f"cannot read HOA file: {exc}", EXIT_PARSE) from exc
    formula = ltl.parse_ltl(args.ltl)
    frag = ltl.to_fragment(formula)
    if frag is None:
        raise CliError(
            "formula is outside the GF/FG/G fragment; supply --hoa instead",
            EXIT_PARSE,
        )
    missing = set(ltl.atoms(formula)) - set(model.atoms)
    if missing:
        raise CliError(
            f"formula atoms {sorted(missing)} not labeled in the model",
            EXIT_VALIDATION,
        )
    return translate_fragment(frag, tuple(model.atoms))


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def _add_spec_args(p):
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--ltl", help="LTL specification text")
    group.add_argument("--hoa", help="path to a Rabin automaton in HOA format")


def _add_reward_args(p, wg=500.0, wb=-500.0, gamma=0.98):
    p.add_argument("--gamma", type=float, default=gamma)
    p.add_argument("--wg", type=float, default=wg, help="reward on accepting states")
    p.add_argument("--wb", type=float, default=wb, help="reward on rejecting states")
    p.add_argument("--pair-index", type=int, default=None,
                   help="restrict to one acceptance pair (1-based)")


def cmd_demo(args):
    if args.which == "grid":
        model = envs.build_grid_world()
        _write(args.out, serialize_mdp(model))
        print(f"grid model: {model.n_states} states -> {args.out}")
        print(f"specification: {envs.GRID_DEMO_FORMULA!r}")
    else:
        config = envs.TrafficConfig(mc_samples=args.samples)
        model = envs.build_traffic_network(config, seed=args.seed)
        _write(args.out, serialize_mdp(model))
        print(f"traffic model: {model.n_states} states -> {args.out}")
        if args.state_meta:
            _write(args.state_meta,
                   json.dumps(envs.traffic_state_meta(config), indent=1))
            print(f"state metadata -> {args.state_meta}")
        print(f"specification: {envs.TRAFFIC_DEMO_FORMULA!r}")
    return EXIT_OK


def cmd_synth(args):
    model = _load_model(args.model)
    dra = _load_dra(args, model)
    product = build_product(model, dra)
    config = SolverConfig(gamma=args.gamma, tol=args.tol)
    pairs = ([args.pair_index] if args.pair_index
             else range(1, product.n_pairs + 1))
    chosen = None
    for i in pairs:
        scheme = RewardScheme(pair_index=i, wg=args.wg, wb=args.wb)
        utilities, policy = value_iteration(product, scheme, config)
        result = satisfies_prob_one(product, policy)
        if chosen is None:
            chosen = (scheme, utilities, policy, result)
        if result.prob_one:
            chosen = (scheme, utilities, policy, result)
            break
    scheme, utilities, policy, result = chosen
    if args.out:
        _write(args.out, policy_to_json(policy, model.actions, product.n_mdp,
                                        product.n_dra, utilities=utilities))
    report = result.report()
    report["pair_solved"] = scheme.pair_index
    text = json.dumps(report, indent=1, sort_keys=True)
    if args.report:
        _write(args.report, text)
    print(text)
    return EXIT_OK if result.prob_one else EXIT_UNSAT


def cmd_learn(args):
    model = _load_model(args.model)
    dra = _load_dra(args, model)
    product = build_product(model, dra)
    strategy = ExplorationStrategy.parse(args.explore)
    scheme = RewardScheme(pair_index=args.pair_index or 1, wg=args.wg, wb=args.wb)
    policy_init = utilities_init = None
    if args.init_policy:
        with open(args.init_policy) as fh:
            policy_init, meta, utilities_init = policy_from_json(
                fh.read(), model.actions
            )
        if (meta["mdp_states"], meta["dra_states"]) != (product.n_mdp, product.n_dra):
            raise CliError("warm-start policy was built for a different product",
                           EXIT_VALIDATION)
    ls = LearnerState(
        product, scheme, gamma=args.gamma, alpha=args.alpha, strategy=strategy,
        reset_interval=args.reset_interval, policy_init=policy_init,
        utility_init=utilities_init,
    )
    ls, log = run_trials(product, ls, args.trials, args.steps, seed=args.seed,
                         backend=args.backend)
    _write(args.out, policy_to_json(ls.greedy_policy(), model.actions,
                                    product.n_mdp, product.n_dra,
                                    utilities=ls.utilities))
    if args.log:
        _write(args.log, log.to_csv())
    print(f"learned policy after {args.trials * args.steps} steps -> {args.out}")
    return EXIT_OK


def cmd_verify(args):
    model = _load_model(args.model)
    dra = _load_dra(args, model)
    product = build_product(model, dra)
    with open(args.policy) as fh:
        policy, meta, _ = policy_from_json(fh.read(), model.actions)
    if (meta["mdp_states"], meta["dra_states"]) != (product.n_mdp, product.n_dra):
        raise CliError("policy was built for a different product", EXIT_VALIDATION)
    result = satisfies_prob_one(product, policy)
    text = json.dumps(result.report(), indent=1, sort_keys=True)
    if args.report:
        _write(args.report, text)
    print(text)
    if args.estimate_traces:
        freq = estimate_satisfaction(product, policy, args.estimate_traces,
                                     args.horizon, args.burn_in, args.seed)
        print(f"empirical satisfaction frequency: {freq}")
    return EXIT_OK


def cmd_simulate(args):
    model = _load_model(args.model)
    dra = _load_dra(args, model)
    product = build_product(model, dra)
    if args.naive_traffic:
        policy = envs.naive_traffic_policy()
    else:
        with open(args.policy) as fh:
            policy, meta, _ = policy_from_json(fh.read(), model.actions)
        if (meta["mdp_states"], meta["dra_states"]) != (product.n_mdp, product.n_dra):
            raise CliError("policy was built for a different product",
                           EXIT_VALIDATION)
    scheme = RewardScheme(pair_index=args.pair_index or 1, wg=args.wg, wb=args.wb)
    trace = simulate(product, policy, args.steps, seed=args.seed, scheme=scheme)
    text = trace.to_csv()
    if args.state_meta:
        with open(args.state_meta) as fh:
            meta = json.load(fh)["states"]
        lines = text.splitlines()
        lines[0] += ",q1,q2,q3,q4,sv1,sv2"
        for i in range(1, len(lines)):
            s = int(trace.mdp_states[i - 1])
            info = meta[s]
            queues = ",".join(repr(float(x)) for x in info["queues"])
            lines[i] += f",{queues},{info['sv1']},{info['sv2']}"
        text = "\n".join(lines) + "\n"
    _write(args.out, text)
    print(f"trace of {args.steps} steps -> {args.out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rabin-synth",
        description="LTL control synthesis for labeled MDPs via Rabin-weighted products",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("demo", help="write the built-in example models")
    p.add_argument("which", choices=("grid", "traffic"))
    p.add_argument("--out", required=True)
    p.add_argument("--state-meta", default=None,
                   help="also write per-state queue metadata (traffic)")
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--seed", type=int, default=_seed_default())
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("synth", help="value iteration + probability-one check")
    p.add_argument("--model", required=True)
    _add_spec_args(p)
    _add_reward_args(p)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", default=None, help="policy file to write")
    p.add_argument("--report", default=None, help="verification report to write")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("learn", help="online TD learning against the model")
    p.add_argument("--model", required=True)
    _add_spec_args(p)
    _add_reward_args(p)
    p.add_argument("--trials", type=int, default=600)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--alpha", type=float, default=0.9)
    p.add_argument("--explore", default="uniform",
                   help="uniform | eps:E[:decay[:min]] | opt:N[:value]")
    p.add_argument("--reset-interval", type=int, default=200)
    p.add_argument("--seed", type=int, default=_seed_default())
    p.add_argument("--out", required=True)
    p.add_argument("--log", default=None, help="trial log CSV to write")
    p.add_argument("--init-policy", default=None, help="warm-start policy file")
    p.add_argument("--backend", default=None, choices=("cython", "python"))
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("verify", help="probability-one check of a policy file")
    p.add_argument("--model", required=True)
    _add_spec_args(p)
    p.add_argument("--policy", required=True)
    p.add_argument("--report", default=None)
    p.add_argument("--estimate-traces", type=int, default=0,
                   help="also estimate satisfaction empirically")
    p.add_argument("--horizon", type=int, default=400)
    p.add_argument("--burn-in", type=int, default=100)
    p.add_argument("--seed", type=int, default=_seed_default())
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="write a trace CSV under a policy")
    p.add_argument("--model", required=True)
    _add_spec_args(p)
    p.add_argument("--policy", default=None)
    p.add_argument("--naive-traffic", action="store_true",
                   help="use the synchronous baseline controller")
    _add_reward_args(p)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=_seed_default())
    p.add_argument("--out", required=True)
    p.add_argument("--state-meta", default=None,
                   help="traffic metadata file; adds queue columns")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "command", None) == "simulate":
        if not args.naive_traffic and not args.policy:
            print("simulate needs --policy or --naive-traffic", file=sys.stderr)
            return EXIT_PARSE
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (LtlSyntaxError, HoaError, SchemaError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (AtomMismatchError, ValueError, KeyError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConvergenceError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
