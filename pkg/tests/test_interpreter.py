import random
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SEEDED, backend_for, load
from logicfuzz.backend.external import ExternalBackend
from logicfuzz.backend.interpreter import BuiltinBackend, Program
from logicfuzz.backend.state import (
    ATTACKER,
    CONTRACT_ADDRESS,
    INITIAL_NATIVE,
    MAX_UINT,
    OWNER,
    VICTIM,
    BackendCrash,
    ConstructorRevert,
    Transaction,
    TxTypeError,
    UnknownDigest,
)
from logicfuzz.frontend import parse

ARITH_SRC = """
contract Arith {
    function add(uint256 a, uint256 b) public pure returns (uint256) { return a + b; }
    function sub(uint256 a, uint256 b) public pure returns (uint256) { return a - b; }
    function mul(uint256 a, uint256 b) public pure returns (uint256) { return a * b; }
    function div(uint256 a, uint256 b) public pure returns (uint256) { return a / b; }
    function mod(uint256 a, uint256 b) public pure returns (uint256) { return a % b; }
}
"""


def oracle(op, a, b):
    """Plain big-integer arithmetic; None means the EVM would revert."""
    if op in ("div", "mod") and b == 0:
        return None
    r = {"add": a + b, "sub": a - b, "mul": a * b, "div": a // b if b else 0, "mod": a % b if b else 0}[op]
    return r if 0 <= r <= MAX_UINT else None


def call(be, state, fn, *args, caller=ATTACKER, value=0, contract=None):
    return be.execute(state, Transaction(caller, contract or be.program.name, fn, tuple(args), value))


def operand(rng):
    pick = rng.random()
    if pick < 0.2:
        return rng.choice([0, 1, 2, MAX_UINT, MAX_UINT - 1, 2**128, 2**255])
    return rng.getrandbits(rng.choice([8, 64, 128, 255, 256]))


@pytest.mark.parametrize("op", ["add", "sub", "mul", "div", "mod"])
def test_arithmetic_matches_oracle_sample(op):
    be = backend_for(ARITH_SRC)
    s = be.deploy()
    rng = random.Random(op)
    for _ in range(500):
        a, b = operand(rng), operand(rng)
        r = call(be, s, op, a, b)
        want = oracle(op, a, b)
        assert (r.return_value if r.ok else None) == want, (a, b)
        assert r.ok == (want is not None)


def test_overflow_reason_and_state_untouched():
    be = backend_for(ARITH_SRC)
    s = be.deploy()
    r = call(be, s, "add", MAX_UINT, 1)
    assert r.status == "Reverted" and r.reason == "Overflow"
    assert r.new_state is s
    assert call(be, s, "div", 1, 0).reason == "DivisionByZero"


COUNTER = """
contract Counter {
    uint256 public total;
    mapping(address => uint256) public credit;
    event Bumped(uint256 by);

    function bump(uint256 by) public {
        total += by;
        credit[msg.sender] += by;
        require(total < 100, "too big");
        emit Bumped(by);
    }

    function pay() public payable returns (uint256) {
        return address(this).balance;
    }

    function loop(uint256 n) public returns (uint256) {
        uint256 acc = 0;
        for (uint256 i = 0; i < n; i += 1) {
            acc += i;
        }
        return acc;
    }

    function neg(uint256 x) public pure returns (uint256) {
        return -x;
    }
}
"""


def test_revert_is_atomic():
    be = backend_for(COUNTER)
    s0 = be.deploy()
    r1 = call(be, s0, "bump", 60)
    assert r1.ok and r1.events == (("Bumped", (60,)),)
    r2 = call(be, r1.new_state, "bump", 50)
    assert r2.status == "Reverted" and r2.reason == "require: too big"
    assert r2.new_state.digest == r1.new_state.digest
    assert r1.new_state.var("Counter", "credit") == {ATTACKER: 60}


def test_payable_moves_native_balance():
    be = backend_for(COUNTER)
    s = be.deploy()
    r = call(be, s, "pay", value=7)
    assert r.ok and r.return_value == 7
    assert r.new_state.balance_of(CONTRACT_ADDRESS) == 7
    assert r.new_state.balance_of(ATTACKER) == INITIAL_NATIVE - 7
    assert call(be, s, "bump", 1, value=1).reason == "NotPayable"
    assert call(be, s, "pay", value=INITIAL_NATIVE + 1).reason == "InsufficientBalance"


def test_loops_and_step_cap():
    be = backend_for(COUNTER)
    s = be.deploy()
    assert call(be, s, "loop", 10).return_value == 45
    r = call(be, s, "loop", 10**9)
    assert r.status == "Reverted"


def test_unary_minus_reverts_except_on_zero():
    be = backend_for(COUNTER)
    s = be.deploy()
    assert call(be, s, "neg", 0).return_value == 0
    assert not call(be, s, "neg", 1).ok


def test_type_errors_are_not_reverts():
    be = backend_for(COUNTER)
    s = be.deploy()
    with pytest.raises(TxTypeError):
        call(be, s, "bump", True)
    with pytest.raises(TxTypeError):
        call(be, s, "bump")
    with pytest.raises(TxTypeError):
        call(be, s, "nope")


def test_constructor_revert():
    be = backend_for("contract A { constructor() { require(false, \"no\"); } }")
    with pytest.raises(ConstructorRevert):
        be.deploy()


def test_execute_is_pure_function_of_state_and_tx():
    be = BuiltinBackend(Program(load("amm_pool.sol")))
    s = be.deploy()
    a = call(be, s, "faucet", 100, 0)
    b = call(be, s, "faucet", 100, 0)
    assert a.new_state.digest == b.new_state.digest and a.coverage == b.coverage


def test_snapshot_restore():
    be = backend_for(COUNTER)
    s = be.deploy()
    d = be.snapshot(call(be, s, "bump", 3).new_state)
    assert be.restore(d).var("Counter", "total") == 3
    with pytest.raises(UnknownDigest):
        be.restore("00" * 32)


def test_amm_case_study_trace():
    """Attacker 100 A -> 100 B, victim 30 A -> 20 B, attacker 100 B -> 165 A."""
    be = BuiltinBackend(Program(load("amm_pool.sol")))
    s = be.deploy()
    s = call(be, s, "faucet", 100, 0).new_state
    s = call(be, s, "faucet", 30, 0, caller=VICTIM).new_state
    r = call(be, s, "swapAForB", 100)
    assert r.return_value == 100
    r = call(be, r.new_state, "swapAForB", 30, caller=VICTIM)
    assert r.return_value == 20
    r = call(be, r.new_state, "swapBForA", 100)
    assert r.return_value == 165 == (100 * 630) // 380
    assert r.new_state.var("AmmPool", "balanceA")[ATTACKER] - 100 == 65


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["bump", "pay"]), st.integers(0, 120)), max_size=6))
def test_reverted_transactions_never_change_state(seq):
    be = backend_for(COUNTER)
    s = be.deploy()
    for fn, n in seq:
        r = call(be, s, fn, n) if fn == "bump" else call(be, s, fn, value=n)
        if not r.ok:
            assert r.new_state.digest == s.digest
        s = r.new_state


def test_external_backend_matches_builtin():
    text = (SEEDED / "amm_pool.sol").read_text()
    ext = ExternalBackend(f"{sys.executable} -m logicfuzz.backend.server", text, "AmmPool")
    try:
        be = BuiltinBackend(Program(parse(text)))
        s_in, s_ex = be.deploy(), ext.deploy()
        assert s_in.digest == s_ex.digest
        for tx in [Transaction(ATTACKER, "AmmPool", "faucet", (100, 5)),
                   Transaction(ATTACKER, "AmmPool", "swapAForB", (100,)),
                   Transaction(ATTACKER, "AmmPool", "swapAForB", (10**6,))]:
            a, b = be.execute(s_in, tx), ext.execute(s_ex, tx)
            assert (a.status, a.new_state.digest, a.coverage, a.return_value) == \
                (b.status, b.new_state.digest, b.coverage, b.return_value)
            s_in, s_ex = a.new_state, b.new_state
    finally:
        ext.close()


def test_external_backend_reports_bad_command():
    with pytest.raises(BackendCrash):
        ExternalBackend("/nonexistent/backend-binary", "contract A {}", "A")


def test_deployer_is_owner():
    be = BuiltinBackend(Program(load("vesting_vault.sol")))
    assert be.deploy().var("VestingVault", "owner") == OWNER
