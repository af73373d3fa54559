"""Hand-extracted checkers for the seeded corpus, independent of any model."""

from fractions import Fraction

from conftest import SEEDED
from logicfuzz.backend.interpreter import BuiltinBackend
from logicfuzz.backend.state import ACTORS, Transaction
from logicfuzz.checkers import instantiate
from logicfuzz.extraction import CriticalVariable, ExtractionResult, PrincipalStatement, validate_statement, validate_variable
from logicfuzz.frontend import parse
from logicfuzz.frontend.query import node_path
from logicfuzz.instrument import instrument
from logicfuzz.taxonomy import Finding, Provenance, Subcategory

CASES = {
    "simple_pool": ("transferFrom", "ApprovalNotClear",
                    [("_allowances[sender][_msgSender()]", "allowance"), ("sender", "allowance owner"),
                     ("amount", "payment amount")],
                    [("_approve(sender, _msgSender(), _allowances[sender][_msgSender()] - amountInShare);",
                      "state_update")]),
    "liquidity_pool": ("deposit", "RiskyFirstDeposit",
                       [("share", "minted shares"), ("totalPooledEther", "total assets"),
                        ("totalShares", "total shares"), ("msg.value", "deposit amount")],
                       [("totalShares += share;", "state_update")]),
    "amm_pool": ("getAmountOut", "AmmPriceOracleManipulation",
                 [("amountB", "output amount"), ("amountA", "input amount")],
                 [("amountB = (amountA * _reserveB) / _reserveA;", "price_read")]),
    "token_sale": ("buyTokens", "NonAmmPriceOracleManipulation",
                   [("weiAmount", "input amount"), ("tokens", "output amount"), ("rate", "declared rate")],
                   [("uint256 tokens = _getTokenAmount(weiAmount);", "price_read")]),
    "staking_rewards": ("stake", "WrongCheckpointOrder",
                        [("balances[msg.sender]", "staked balance")],
                        [("_updateReward(msg.sender);", "checkpoint_update"),
                         ("balances[msg.sender] += amount;", "state_update")]),
    "vesting_vault": ("withdraw", "WrongAmountLock",
                      [("balances[msg.sender]", "guarded balance"), ("locked[msg.sender]", "locked amount"),
                       ("amount", "withdrawn amount")],
                      [("balances[msg.sender] -= amount;", "state_update")]),
}

# statements whose text differs in the patched twin
PATCH = {
    "_approve(sender, _msgSender(), _allowances[sender][_msgSender()] - amountInShare);":
        "_approve(sender, _msgSender(), _allowances[sender][_msgSender()] - amount);",
    "amountB = (amountA * _reserveB) / _reserveA;": "amountB = (amountA * PRICE) / 1e18;",
}


def extraction_for(unit, function, subcategory, variables, statements):
    c = unit.contracts[0]
    f = c.function(function)
    site = node_path(unit, f)
    fi = Finding(f"{unit.path}:{c.name}", f.id, function, Subcategory(subcategory), Provenance.Fused, Fraction(1))
    r = ExtractionResult(fi)
    for expr, role in variables:
        v = validate_variable(expr, site, unit, role)
        assert isinstance(v, CriticalVariable), v
        r.variables.append(v)
    for text, role in statements:
        s = validate_statement(text, site, unit, role)
        assert isinstance(s, PrincipalStatement), s
        r.statements.append(s)
    return r


def build(name, patched=False, thresholds=None):
    """``(unit, InstrumentOutcome)`` for a seeded case or its patched twin."""
    fn, sub, variables, statements = CASES[name]
    fname = f"{name}_patched.sol" if patched else f"{name}.sol"
    unit = parse((SEEDED / fname).read_text(encoding="utf-8"), fname)
    if patched:
        statements = [(PATCH.get(s, s), r) for s, r in statements]
    insts = instantiate(extraction_for(unit, fn, sub, variables, statements), thresholds)
    return unit, instrument(unit, insts)


def run(name, txs, patched=False):
    _, out = build(name, patched)
    be = BuiltinBackend(out.unit.program())
    s = be.deploy()
    results = []
    for t in txs:
        r = be.execute(s, t)
        results.append(r)
        s = r.new_state
    return results


def random_tx(rng, contract):
    """A random externally callable transaction with mostly small arguments."""
    funcs = [f for f in contract.functions if f.callable_externally]
    f = rng.choice(funcs)

    def arg(t):
        if t.name == "bool":
            return rng.random() < 0.5
        if t.name == "address":
            return rng.choice(ACTORS + (0,))
        return rng.choice((rng.randrange(0, 300), 10 ** rng.randrange(0, 25), rng.getrandbits(256)))

    value = rng.choice((0, rng.randrange(0, 5000), 10**18)) if f.payable else 0
    return Transaction(rng.choice(ACTORS[:4]), contract.name, f.name, tuple(arg(p.type_name) for p in f.params), value)


def corpus_instrumentations():
    """``(name, unit, InstrumentOutcome)`` for every corpus file, each with all its checkers."""
    import json

    from conftest import EXTRACTION, EXTRACTION_LABELS
    from logicfuzz.checkers import CheckerRegistry, UnboundParam

    for name in CASES:
        for patched in (False, True):
            unit, out = build(name, patched)
            yield unit.path, unit, out
    by_file: dict[str, list] = {}
    for e in json.loads(EXTRACTION_LABELS.read_text(encoding="utf-8")):
        if e["file"].startswith("extraction/"):
            by_file.setdefault(e["file"], []).append(e)
    for path in sorted(EXTRACTION.glob("*.sol")):
        rel = f"extraction/{path.name}"
        unit = parse(path.read_text(encoding="utf-8"), rel)
        reg, insts = CheckerRegistry(), []
        for e in by_file.get(rel, []):
            ex = extraction_for(unit, e["function"], e["subcategory"], e["variables"], e["statements"])
            try:
                insts += instantiate(ex, registry=reg)
            except UnboundParam:
                pass
        yield rel, unit, instrument(unit, insts)



def neutrality_mismatches(sequences: int, seed: int = 42, max_len: int = 8):
    """Run random sequences on each patched twin with and without checkers; list any divergence."""
    import random

    from logicfuzz.backend.interpreter import Program
    from logicfuzz.instrument import observable_digest

    rng = random.Random(seed)
    names = sorted(CASES)
    twins = {}
    for name in names:
        unit, out = build(name, patched=True)
        twins[name] = (unit.contracts[0], BuiltinBackend(Program(unit)), BuiltinBackend(out.unit.program()))
    mismatches, executed = [], 0
    for i in range(sequences):
        contract, plain, instr = twins[names[i % len(names)]]
        s_plain, s_instr = plain.deploy(), instr.deploy()
        for _ in range(rng.randint(1, max_len)):
            tx = random_tx(rng, contract)
            a, b = plain.execute(s_plain, tx), instr.execute(s_instr, tx)
            executed += 1
            s_plain, s_instr = a.new_state, b.new_state
            same = (a.status, a.return_value, observable_digest(s_plain, contract.name)) == \
                   (b.status, b.return_value, observable_digest(s_instr, contract.name))
            if not same:
                mismatches.append((contract.name, tx.describe(), a.status, b.status, a.reason, b.reason))
    return mismatches, executed
