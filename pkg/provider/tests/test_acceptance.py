"""Release gate for the encoder adapter: one test per criterion.

Criterion: encode_file output parses through the pipeline's read_embeddings
with zero validation errors; the header dim equals the encoder width;
re-encoding the same file yields vector-identical output; the token report
flags a 1,000-word fixture as truncated under the default budget of 512.
"""

import numpy as np
from conftest import HIDDEN_SIZE
from itemalign.embeddings import read_embeddings
from itemalign_provider.encoder import (
    ProviderConfig,
    SentenceEncoder,
    encode_file,
    token_report,
)


def test_provider_round_trip(checkpoint, composed_file, long_file, tmp_path):
    config = ProviderConfig(model=checkpoint)
    encoder = SentenceEncoder(config)

    first = tmp_path / "first.embeddings.txt"
    written = encode_file(composed_file, first, config, encoder)
    loaded = read_embeddings(first.read_text(encoding="utf-8"))
    assert loaded.ids() == written.ids()

    assert loaded.dim == encoder.width == HIDDEN_SIZE

    second = tmp_path / "second.embeddings.txt"
    reencoded = encode_file(composed_file, second, config, encoder)
    assert np.array_equal(written.matrix(), reencoded.matrix())
    assert first.read_bytes() == second.read_bytes()

    rows = token_report(long_file, config, encoder)
    assert rows[0].token_count > 512 and rows[0].truncated is True
