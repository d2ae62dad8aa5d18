"""Command-line interface.

Subcommands mirror the pipeline: `ingest` validates record files, `index`
builds signatures, `query` retrieves against an index, and `eval`,
`diversity`, `screen`, and `scale-curve` cover the analytics. `serve`
exposes the query engine over HTTP.

Exit codes: 0 success, 1 usage problems, 2 data/validation problems,
3 provider/encoder problems. Output is a human table by default or
line-delimited JSON with `--format records`; given identical inputs, both
are byte-identical across runs.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import analytics as an
from . import indexer as ix
from . import query as qe
from .errors import LoradexError, ProviderError, UsageError
from .providers import provider_from_spec
from .store import (
    DEFAULT_ENCODER_TAG,
    PromptRole,
    ingest_records,
    load_corpus,
    load_index,
    load_prompt_set,
    read_records,
    save_index,
    write_records,
    write_sidecar,
)

_FORMAT = click.option(
    "--format", "fmt", type=click.Choice(["table", "records"]), default="table",
    show_default=True, help="Human-readable table or line-delimited JSON.",
)


def _emit_records(rows) -> None:
    for row in rows:
        click.echo(json.dumps(row, separators=(",", ":")))


@click.group(name="loradex")
@click.version_option(package_name="loradex")
def cli() -> None:
    """Index text-to-image adapters by behavior; retrieve them by text."""


# ---------------------------------------------------------------------------
# ingest
# ---------------------------------------------------------------------------


@cli.command()
@click.argument("records", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--expected-dim", type=int, default=512, show_default=True,
              help="Embedding dimension every record must have.")
@click.option("--encoder-tag", default=DEFAULT_ENCODER_TAG, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path),
              help="Write the validated corpus to this canonical records file.")
@click.option("--binary-out", type=click.Path(dir_okay=False, path_type=Path),
              help="Also write the compact binary sidecar.")
@_FORMAT
def ingest(records, expected_dim, encoder_tag, out, binary_out, fmt):
    """Validate and deduplicate record files into one corpus."""

    def _stream():
        for path in records:
            yield from read_records(path)

    corpus = ingest_records(_stream(), expected_dim, encoder_tag)
    if out is not None:
        write_records(corpus.iter_records(), out)
    if binary_out is not None:
        write_sidecar(corpus, binary_out)
    manifest = corpus.manifest.to_dict()
    if fmt == "records":
        _emit_records([{"manifest": manifest, "encoder_tag": encoder_tag}])
    else:
        for key, value in manifest.items():
            click.echo(f"{key}\t{value}")


# ---------------------------------------------------------------------------
# index
# ---------------------------------------------------------------------------


@cli.command(name="index")
@click.option("--corpus", "corpus_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Records file or binary sidecar.")
@click.option("--out", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--expected-dim", type=int, default=None,
              help="Check the corpus dimension (default: trust the file).")
@click.option("--encoder-tag", default=DEFAULT_ENCODER_TAG, show_default=True)
@click.option("--min-samples", type=int, default=2, show_default=True)
@click.option("--parallelism", type=int, default=1, show_default=True)
@click.option("--scale-tag", type=float, default=1.0, show_default=True,
              help="Adapter scale the corpus was generated at (provenance only).")
@click.option("--created-at", default=None, envvar="LORADEX_CREATED_AT",
              help="Pin the index timestamp (for reproducible files).")
@_FORMAT
def build(corpus_path, out, expected_dim, encoder_tag, min_samples, parallelism,
          scale_tag, created_at, fmt):
    """Build adapter signatures from a corpus and save the index."""
    corpus = load_corpus(corpus_path, expected_dim=expected_dim, encoder_tag=encoder_tag)
    config = ix.IndexBuildConfig(min_samples=min_samples, parallelism=parallelism,
                                 scale_tag=scale_tag)
    index = ix.build_index(corpus, config, created_at=created_at)
    save_index(index, out)
    report = index.build_report
    if fmt == "records":
        rows = [{
            "index_id": index.index_id,
            "adapters": len(index),
            "excluded": [
                {"adapter_id": a, "reason": r} for a, r in (report.exclusions if report else [])
            ],
        }]
        _emit_records(rows)
    else:
        click.echo(f"index_id\t{index.index_id}")
        click.echo(f"adapters\t{len(index)}")
        if report and report.exclusions:
            for adapter_id, reason in report.exclusions:
                click.echo(f"excluded\t{adapter_id}\t{reason}")


# ---------------------------------------------------------------------------
# query
# ---------------------------------------------------------------------------


@cli.command()
@click.argument("text")
@click.option("--index", "index_path", required=True, envvar="LORADEX_INDEX",
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--provider", "provider_spec", required=True, envvar="LORADEX_PROVIDER",
              help="Encoder service URL or path to a records cache.")
@click.option("--prompts", "prompts_path",
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Retrieval prompt file (not needed for --variant query_only).")
@click.option("--variant", type=click.Choice([v.value for v in qe.QueryVariant]),
              default=qe.QueryVariant.SUFFIX.value, show_default=True)
@click.option("--tau-s", type=float, default=qe.DEFAULT_TAU_S, show_default=True,
              help="Keep adapters with strength strictly below this.")
@click.option("--tau-c", type=float, default=qe.DEFAULT_TAU_C, show_default=True,
              help="Keep adapters with consistency strictly above this.")
@click.option("--top-k", type=int, default=qe.DEFAULT_TOP_K, show_default=True)
@click.option("--include-failed", is_flag=True,
              help="Keep filtered-out adapters in the output, with reasons.")
@_FORMAT
def query(text, index_path, provider_spec, prompts_path, variant, tau_s, tau_c,
          top_k, include_failed, fmt):
    """Rank indexed adapters against a text query."""
    if not text.strip():
        raise UsageError("query text must be non-empty")
    index = load_index(index_path)
    provider = provider_from_spec(provider_spec, encoder_tag=index.encoder_tag)
    variant_v = qe.QueryVariant(variant)
    prompts = None
    if variant_v is not qe.QueryVariant.QUERY_ONLY:
        if prompts_path is None:
            raise UsageError(f"--prompts is required for variant {variant}")
        prompts = load_prompt_set(prompts_path, PromptRole.RETRIEVAL)
    config = qe.FilterConfig(tau_s=tau_s, tau_c=tau_c, top_k=top_k)
    result = qe.retrieve(index, text, prompts, provider, config,
                         variant_v, include_failed)
    if fmt == "records":
        _emit_records([result.to_dict()])
        return
    click.echo(f"# index_id={result.index_id} encoder_tag={result.encoder_tag}"
               f" variant={result.variant.value} tau_s={result.tau_s!r}"
               f" tau_c={result.tau_c!r} top_k={result.top_k}")
    if result.warning:
        click.echo(f"# warning: {result.warning}")
    click.echo("rank\tadapter_id\tscore\tstrength\tconsistency\tpassed\treasons")
    for pos, e in enumerate(result.entries, start=1):
        score = "-inf" if e.score == float("-inf") else repr(e.score)
        click.echo(
            f"{pos}\t{e.adapter_id}\t{score}\t{e.strength!r}\t{e.consistency!r}"
            f"\t{str(e.passed_filter).lower()}\t{','.join(e.fail_reasons) or '-'}"
        )


# ---------------------------------------------------------------------------
# analytics commands
# ---------------------------------------------------------------------------


@cli.command(name="eval")
@click.option("--scores", "scores_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Tab-delimited evaluator scores.")
@click.option("--k-max", type=int, default=7, show_default=True)
@_FORMAT
def eval_cmd(scores_path, k_max, fmt):
    """Normalize evaluator scores and print the cumulative top-k table."""
    records = an.read_eval_records(scores_path)
    table = an.topk_table(an.normalize_scores(records), k_max)
    if fmt == "records":
        _emit_records([table.to_dict()])
    else:
        click.echo(table.to_text())


@cli.command()
@click.option("--results", "results_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Retrieval results, one JSON document per line.")
@click.option("--index", "index_path", required=True, envvar="LORADEX_INDEX",
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--k", type=int, default=3, show_default=True)
@_FORMAT
def diversity(results_path, index_path, k, fmt):
    """Diversity of the adapters surfaced across a batch of queries."""
    index = load_index(index_path)
    results = an.results_from_jsonl(results_path)
    dist = an.retrieval_counts(results, k, index)
    metrics = an.diversity_metrics(dist)
    row = {
        "k": k,
        "queries": len(results),
        "support": dist.support_size,
        "total_counted": dist.total,
        "normalized_entropy": metrics.normalized_entropy,
        "gini": metrics.gini,
        "effective_count": metrics.effective_count,
    }
    if fmt == "records":
        _emit_records([row])
    else:
        for key, value in row.items():
            click.echo(f"{key}\t{value!r}" if isinstance(value, float) else f"{key}\t{value}")


@cli.command()
@click.option("--index", "index_path", required=True, envvar="LORADEX_INDEX",
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--strength-split", type=float, default=0.5, show_default=True)
@click.option("--consistency-split", type=float, default=0.5, show_default=True)
@_FORMAT
def screen(index_path, strength_split, consistency_split, fmt):
    """Quadrant screening of the index by strength/consistency percentiles."""
    index = load_index(index_path)
    report = an.screening_report(index, strength_split, consistency_split)
    if fmt == "records":
        _emit_records([report.to_dict()])
    else:
        click.echo(report.to_text(), nl=False)


@cli.command(name="scale-curve")
@click.option("--index", "index_specs", multiple=True, required=True,
              help="SCALE=PATH, repeatable (e.g. --index 0.5=half.ldxi).")
@click.option("--adapter", "adapter_id", required=True)
@_FORMAT
def scale_curve_cmd(index_specs, adapter_id, fmt):
    """Adapter strength across indexes built at different scales."""
    indices = {}
    for spec in index_specs:
        scale_s, sep, path = spec.partition("=")
        if not sep:
            raise UsageError(f"--index expects SCALE=PATH, got {spec!r}")
        try:
            scale = float(scale_s)
        except ValueError:
            raise UsageError(f"bad scale {scale_s!r} in {spec!r}") from None
        if scale in indices:
            raise UsageError(f"scale {scale} given twice")
        if not Path(path).is_file():
            raise UsageError(f"no such index file: {path}")
        indices[scale] = load_index(path)
    curve = an.scale_curve(indices, adapter_id)
    for note in curve.notes:
        click.echo(f"# {note}", err=True)
    if fmt == "records":
        _emit_records([{"adapter_id": curve.adapter_id, "points": curve.to_rows()}])
    else:
        click.echo("scale\tstrength")
        for scale, value in curve.points:
            click.echo(f"{scale!r}\t{value!r}")


# ---------------------------------------------------------------------------
# serve
# ---------------------------------------------------------------------------


@cli.command()
@click.option("--index", "index_path", required=True, envvar="LORADEX_INDEX",
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--provider", "provider_spec", required=True, envvar="LORADEX_PROVIDER",
              help="Encoder service URL or path to a records cache.")
@click.option("--prompts", "prompts_path",
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--listen", default="127.0.0.1:8710", envvar="LORADEX_LISTEN",
              show_default=True, help="host:port to bind.")
@click.option("--tau-s", type=float, default=qe.DEFAULT_TAU_S, show_default=True)
@click.option("--tau-c", type=float, default=qe.DEFAULT_TAU_C, show_default=True)
@click.option("--top-k", type=int, default=qe.DEFAULT_TOP_K, show_default=True)
@click.option("--cors", "cors_origins", multiple=True,
              help="Allowed CORS origin, repeatable.")
def serve(index_path, provider_spec, prompts_path, listen, tau_s, tau_c, top_k,
          cors_origins):
    """Serve the query engine over HTTP."""
    from .service import create_app

    host, sep, port_s = listen.rpartition(":")
    if not sep or not host:
        raise UsageError(f"--listen expects host:port, got {listen!r}")
    try:
        port = int(port_s)
    except ValueError:
        raise UsageError(f"bad port {port_s!r}") from None
    index = load_index(index_path)
    provider = provider_from_spec(provider_spec, encoder_tag=index.encoder_tag)
    prompts = None
    if prompts_path is not None:
        prompts = load_prompt_set(prompts_path, PromptRole.RETRIEVAL)
    app = create_app(
        index, provider, prompts,
        default_filter=qe.FilterConfig(tau_s=tau_s, tau_c=tau_c, top_k=top_k),
        cors_origins=list(cors_origins),
    )
    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level="warning")


def main(argv=None) -> int:
    """Entry point with stable exit codes (1 usage, 2 data, 3 provider)."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except UsageError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except ProviderError as exc:
        click.echo(f"provider error: {exc}", err=True)
        return 3
    except LoradexError as exc:  # DataError and other engine failures
        click.echo(f"data error: {exc}", err=True)
        return 2
    except OSError as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
