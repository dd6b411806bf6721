/*
 * 64-bit flow digest over (five-tuple, IPv4 id, IPv4 total length).
 *
 * The constants and rounds here MUST stay identical to the userspace
 * codec (upfmeter.codec.flow_key_digest): the whole correlation scheme
 * rests on M1 (kernel), M3 (kernel) and replay tooling (userspace)
 * deriving the same key from the same inner packet. Cross-checked by
 * flowkey_selftest against digests recomputed in Python.
 *
 * Addresses/ports/lengths are passed in host byte order (i.e. after
 * ntoh conversion of the wire fields).
 */
#ifndef UPF_MEASURE_FLOWKEY_H
#define UPF_MEASURE_FLOWKEY_H

#ifndef __always_inline
#define __always_inline inline __attribute__((always_inline))
#endif

typedef unsigned long long fk_u64;
typedef unsigned int fk_u32;

#define FLOW_KEY_SEED 0x9e3779b97f4a7c15ULL

static __always_inline fk_u64 fk_mix64(fk_u64 x)
{
	x ^= x >> 30;
	x *= 0xbf58476d1ce4e5b9ULL;
	x ^= x >> 27;
	x *= 0x94d049bb133111ebULL;
	return x ^ (x >> 31);
}

static __always_inline fk_u64 flow_key_digest(fk_u32 src, fk_u32 dst,
					      fk_u32 proto, fk_u32 sport,
					      fk_u32 dport, fk_u32 ip_id,
					      fk_u32 total_len)
{
	fk_u64 w0 = ((fk_u64)src << 32) | dst;
	fk_u64 w1 = ((fk_u64)(sport & 0xffff) << 48) |
		    ((fk_u64)(dport & 0xffff) << 32) |
		    ((fk_u64)(ip_id & 0xffff) << 16) |
		    (fk_u64)(total_len & 0xffff);
	fk_u64 h = fk_mix64(w0 ^ FLOW_KEY_SEED);

	h = fk_mix64(h ^ w1);
	return fk_mix64(h ^ (proto & 0xff));
}

#endif /* UPF_MEASURE_FLOWKEY_H */
