from __future__ import annotations

from importlib import resources

import pytest

from mandala.cli import main

CORPUS = resources.files("mandala.corpus")
TOKEN_ADDR = "e0d6a0591ccdfc5437ccdac14f445005a50c1da0d8cb141128e44268a0c0864c"
CORPUS_DIGEST = "2b278a8bea2b1314d8ab14c7c937ae98c20498ee2b29be111f2f8cef600bc791"
TRANSFER = ["call", "PurseStorage.transfer", "[MyToken]", "id:alice", "id:bob", "val:MyFixSupplyToken.defaultStore", "int:250"]


def src(name: str) -> str:
    return str(CORPUS.joinpath(name))


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out.splitlines(), err.splitlines()


@pytest.fixture
def store(tmp_path, capsys):
    s = str(tmp_path / "ledger")
    for f in ("token", "purse", "purse_storage"):
        assert run(capsys, "deploy", src(f"{f}.mdl"), "--store", s)[0] == 0
    assert run(capsys, "deploy", src("my_fix_supply_token.mdl"), "--signer", "alice", "--store", s)[0] == 0
    return s


def test_check(capsys):
    code, out, _ = run(capsys, "check", src("token.mdl"))
    assert code == 0 and out == [f"OK {src('token.mdl')}"]
    path = src("negative/n01_lin_copy.mdl")
    code, _, err = run(capsys, "check", path)
    assert code == 1 and err[0].startswith(f"E-LIN-COPY {path}:4:27 ")
    code, _, err = run(capsys, "check", "/nonexistent/x.mdl")
    assert code == 2 and err[0].startswith("IO ")


def test_deploy_lines(tmp_path, capsys):
    code, out, _ = run(capsys, "deploy", src("token.mdl"), "--store", str(tmp_path / "s"))
    assert code == 0
    assert out[0] == f"Token {TOKEN_ADDR}"
    assert out[1:5] == ["  fn merge bound=12", "  fn split bound=18", "  fn mint bound=4", "  fn zero bound=4"]
    assert out[5] == f"ok 0 0 a2148772428a8bfd64b64af0f5836fb71a4640a88fc74eb83cd75f1d7a30143d {TOKEN_ADDR}"


def test_inspect_and_transfer(store, capsys):
    code, out, _ = run(capsys, "inspect", "cell:MyFixSupplyToken.defaultStore:alice", "--store", store)
    assert code == 0 and out == ["Token[MyToken](100000000)"]
    code, out, _ = run(capsys, *TRANSFER, "--signer", "alice", "--store", store)
    assert code == 0
    assert out == ["ok 656 670 d27453a4044e008f39c1fa171f2ce214acfdbe10e43d010511b0be36fc0827e2 ()"]
    assert run(capsys, "inspect", "cell:MyFixSupplyToken.defaultStore:bob", "--store", store)[1] == ["Token[MyToken](250)"]
    code, out, _ = run(capsys, "inspect", "Token", "--store", store)
    assert out[0] == f"module Token {TOKEN_ADDR}"


def test_rejections(store, capsys):
    code, out, _ = run(capsys, *TRANSFER, "--store", store)
    assert code == 1 and out[0].startswith("TxRejected(MissingSigner)")
    code, out, _ = run(capsys, *TRANSFER, "--signer", "alice", "--gas", "5", "--store", store)
    assert code == 1 and out[0] == "TxRejected(InsufficientGasLimit) limit 5 is below the bound 670"
    code, out, _ = run(capsys, "deploy", src("token.mdl"), "--store", store)
    assert code == 1 and out[0] == f"DuplicateModule module {TOKEN_ADDR} is already deployed"


def test_error_receipt(store, capsys):
    argv = ["call", "PurseStorage.transfer", "[MyToken]", "id:carol", "id:bob", "val:MyFixSupplyToken.defaultStore", "int:1"]
    code, out, _ = run(capsys, *argv, "--signer", "carol", "--store", store)
    assert out[0].startswith("error:NumericUnderflow ") and out[0].endswith(" -")


def test_compile_and_decode(tmp_path, capsys):
    target = str(tmp_path / "t.mdlc")
    code, out, _ = run(capsys, "compile", src("token.mdl"), "-o", target)
    assert code == 0 and out == [f"{TOKEN_ADDR} {target}"]
    code, out, _ = run(capsys, "decode", target)
    assert out[0] == f"Token {TOKEN_ADDR} funs=4 vals=0 types=1"


def test_corpus_digest(tmp_path, capsys):
    code, out, _ = run(capsys, "--machine", "corpus", "--store", str(tmp_path / "c"))
    assert code == 0 and out == [f"digest {CORPUS_DIGEST}"]
    code, out, _ = run(capsys, "corpus", "--store", str(tmp_path / "d"))
    assert len(out) == 15 and out[-1] == f"digest {CORPUS_DIGEST}"
