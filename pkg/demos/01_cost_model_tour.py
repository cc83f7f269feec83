"""Tour of the GPU cost model.

Shows prefill/decode/reload timing on the built-in hardware profiles,
the cache-vs-recompute threshold, and the optimal number of decode-KV
tokens to keep when a request is evicted.
"""

from semsched import (
    BUILTIN_PROFILES,
    decode_total_time,
    get_profile,
    optimal_save_tokens,
    prefill_time,
    reload_time,
    resume_cost,
    should_cache_prefill,
)


def main() -> None:
    print("Built-in profiles:")
    for name, p in BUILTIN_PROFILES.items():
        print(f"  {name:22s} prefill(512)={prefill_time(512, p):9.4f}s "
              f"decode(512ctx, 128tok)={decode_total_time(512, 128, p):8.4f}s "
              f"reload(512)={reload_time(512, p):8.4f}s")

    print("\nCache-vs-recompute threshold (keep prefill KV on eviction?):")
    a5000 = get_profile("a5000_qwen7b")
    for n in (500, 2000, 8000, 32000, 130000):
        verdict = "offload to host" if should_cache_prefill(n, a5000) else "recompute"
        print(f"  a5000_qwen7b, prompt {n:6d}: {verdict}")

    print("\nOptimal decode-KV save count at eviction:")
    p = get_profile("a100_qwen7b")
    for n, m_done in ((100, 50), (1000, 200)):
        s = optimal_save_tokens(n, m_done, p)
        print(f"  a100_qwen7b, prompt {n}, {m_done} tokens decoded: "
              f"save {s}/{m_done} "
              f"(resume {resume_cost(n, m_done, s, p):.4f}s vs "
              f"save-nothing {resume_cost(n, m_done, 0, p):.4f}s)")


if __name__ == "__main__":
    main()
