import json
import math

import pytest
from hypothesis import given, strategies as st

from warpshare.asmreorder import parse, reorder
from warpshare.config import SmConfig
from warpshare.errors import InvalidKernel, ValidationError
from warpshare.workload import (AddrPattern, KernelSpec, OpKind, Profile, TraceOp,
                                generate, kernel_from_asm, kernel_from_dict,
                                kernel_to_dict, load_kernel, op_mix, renumber_by_first_use,
                                save_kernel, validate)

CFG = SmConfig()


def _hotspot_like(**kw):
    body = (TraceOp(OpKind.ALU, (1,), (36,)),
            TraceOp(OpKind.GLOBAL_LOAD, (2,), (1,), addr=AddrPattern(0, 128, 0)),
            TraceOp(OpKind.EXIT))
    args = dict(name="h", grid_blocks=10, threads_per_block=256, regs_per_thread=36,
                scratchpad_per_block=0, body=body)
    args.update(kw)
    return KernelSpec(**args)


def test_validate_accepts_hotspot_shape():
    validate(_hotspot_like(), CFG)


def test_validate_rejects_oversized_block():
    with pytest.raises(InvalidKernel, match="cannot fit"):
        validate(_hotspot_like(threads_per_block=1024, regs_per_thread=64), CFG)


def test_validate_rejects_offset_out_of_range():
    body = (TraceOp(OpKind.SHARED_LOAD, (1,), (), 4096), TraceOp(OpKind.EXIT))
    k = _hotspot_like(scratchpad_per_block=4096, body=body)
    with pytest.raises(InvalidKernel, match="out of range"):
        validate(k, CFG)


@pytest.mark.parametrize("body, fragment", [
    ((TraceOp(OpKind.ALU, (1,), ()),), "end with exit"),
    ((TraceOp(OpKind.EXIT), TraceOp(OpKind.EXIT)), "last op"),
    ((TraceOp(OpKind.ALU, (99,), ()), TraceOp(OpKind.EXIT)), "register 99"),
    ((TraceOp(OpKind.GLOBAL_LOAD, (1,), ()), TraceOp(OpKind.EXIT)), "needs addr"),
    ((TraceOp(OpKind.BARRIER, (1,), ()), TraceOp(OpKind.EXIT)), "no operands"),
])
def test_validate_reasons(body, fragment):
    with pytest.raises(InvalidKernel, match=fragment):
        validate(_hotspot_like(body=body), CFG)


def test_validate_collects_every_reason():
    k = _hotspot_like(threads_per_block=100, loop_trip_count=0)
    with pytest.raises(InvalidKernel) as info:
        validate(k, CFG)
    assert len(info.value.reasons) >= 2


def test_instruction_count():
    k = _hotspot_like(loop_trip_count=3)
    assert k.warps_per_block == 8
    assert k.total_instructions == 10 * 8 * 3 * 3


@pytest.mark.parametrize("profile", list(Profile))
def test_generated_kernels_validate(profile):
    for seed in range(1000):
        validate(generate(profile, seed), CFG)


@pytest.mark.parametrize("profile", list(Profile))
def test_generated_bodies_cover_both_register_ranges(profile):
    for seed in range(200):
        k = generate(profile, seed)
        low = max(1, math.floor(k.regs_per_thread * 0.1))
        regs = {r for op in k.body for r in op.registers()}
        assert any(r <= low for r in regs), seed
        assert any(r > low for r in regs), seed


def test_generate_is_deterministic():
    assert generate(Profile.MEMORY_BOUND, 1) == generate(Profile.MEMORY_BOUND, 1)
    assert generate(Profile.MEMORY_BOUND, 1) != generate(Profile.MEMORY_BOUND, 2)


def test_profile_mixes():
    assert op_mix(generate(Profile.COMPUTE_BOUND, 1))[OpKind.ALU] >= 0.8
    mem = op_mix(generate(Profile.MEMORY_BOUND, 1))
    assert mem[OpKind.GLOBAL_LOAD] + mem[OpKind.GLOBAL_STORE] >= 0.3
    k = generate(Profile.SCRATCHPAD_HEAVY, 7)
    half = math.floor(0.5 * k.scratchpad_per_block)
    assert any(op.kind is OpKind.SHARED_LOAD and op.shared_offset > half for op in k.body)


def test_profile_parse():
    assert Profile.parse("memory") is Profile.MEMORY_BOUND
    assert Profile.parse(Profile.COMPUTE_BOUND) is Profile.COMPUTE_BOUND


@given(st.sampled_from(list(Profile)), st.integers(0, 10_000))
def test_json_round_trip(profile, seed):
    k = generate(profile, seed)
    assert kernel_from_dict(json.loads(json.dumps(kernel_to_dict(k)))) == k


def test_save_and_load(tmp_path):
    k = generate(Profile.SCRATCHPAD_HEAVY, 3)
    save_kernel(k, tmp_path / "k.json")
    assert load_kernel(tmp_path / "k.json") == k
    assert load_kernel(tmp_path / "k.json").digest() == k.digest()


@pytest.mark.parametrize("mutate, path", [
    (lambda d: d.pop("loop_trip_count"), "<root>"),
    (lambda d: d["body"][0].update(op="nope"), "body/0/op"),
    (lambda d: d["body"][0].update(dst=["x"]), "body/0/dst/0"),
    (lambda d: d.update(grid_blocks=-1), "grid_blocks"),
    (lambda d: d.update(extra=1), "<root>"),
])
def test_schema_errors_name_the_field(mutate, path):
    d = kernel_to_dict(generate(Profile.COMPUTE_BOUND, 0))
    mutate(d)
    with pytest.raises(ValidationError, match=f"workload {path}"):
        kernel_from_dict(d)


def test_invalid_json_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ValidationError, match="invalid JSON"):
        load_kernel(p)


def test_renumber_by_first_use():
    body = (TraceOp(OpKind.ALU, (7,), (3,)), TraceOp(OpKind.ALU, (3,), (9,)),
            TraceOp(OpKind.EXIT))
    k, mapping = renumber_by_first_use(_hotspot_like(regs_per_thread=10, body=body))
    assert [op.dst + op.src for op in k.body[:2]] == [(1, 2), (2, 3)]
    assert sorted(mapping.values()) == list(range(1, 11))
    assert mapping[1] == 4  # first untouched register follows the used ones


@given(st.sampled_from(list(Profile)), st.integers(0, 500))
def test_renumber_is_a_permutation_and_idempotent(profile, seed):
    k = generate(profile, seed)
    once, mapping = renumber_by_first_use(k)
    assert sorted(mapping) == sorted(mapping.values()) == list(range(1, k.regs_per_thread + 1))
    twice, _ = renumber_by_first_use(once)
    assert twice == once
    validate(once, CFG)


def test_kernel_from_asm():
    m = parse(".reg .u32 $r<4>; .reg .pred $p;"
              "mov.u32 $r1, s[0x10]; mov.u32 s[0x20], $r2; bar.sync 0; setp.lt.s32 $p, $r1, 4;")
    k = kernel_from_asm(m, threads_per_block=64)
    kinds = [op.kind for op in k.body]
    assert kinds == [OpKind.SHARED_LOAD, OpKind.SHARED_STORE, OpKind.BARRIER, OpKind.ALU,
                     OpKind.EXIT]
    assert k.body[0].dst == (2,) and k.body[0].shared_offset == 0x10
    assert k.body[1].src == (3,)
    assert k.body[3].dst == (5,) and k.body[3].src == (2,)
    assert k.regs_per_thread == 5
    validate(k, CFG)


def test_kernel_from_reordered_asm_uses_new_numbers():
    m = parse(".reg .u32 $r<4>; mov.u32 $r3, $r2;")
    assert kernel_from_asm(m).body[0].registers() == (4, 3)
    assert kernel_from_asm(reorder(m)).body[0].registers() == (1, 2)
