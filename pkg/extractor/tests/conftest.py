import pytest

from lpp_extractor.smoke import build_smoke_model, smoke_utterances, train_smoke_tokenizer


@pytest.fixture(scope="session")
def smoke_model_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("smoke") / "model"
    tokenizer = train_smoke_tokenizer(d)
    build_smoke_model(d, tokenizer, seed=0)
    return d


@pytest.fixture(scope="session")
def trilingual_corpus():
    return {lang: smoke_utterances(lang) for lang in ("en", "fr", "zh")}
