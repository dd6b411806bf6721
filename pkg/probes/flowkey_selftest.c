/*
 * Cross-boundary digest check: prints 1000 deterministic test vectors
 * computed by the kernel-side mixing function. The probe test suite
 * recomputes the same vectors with the userspace codec and diffs them.
 *
 * Output: one line per vector,
 *   src dst proto sport dport id len digest   (all lowercase hex)
 */
#include <stdint.h>
#include <stdio.h>

#include "flowkey.h"

int main(void)
{
	/* LCG; constants mirrored in the Python side of the test */
	uint64_t state = 0x243f6a8885a308d3ULL;
	int i;

	for (i = 0; i < 1000; i++) {
		uint32_t field[7];
		int j;

		for (j = 0; j < 7; j++) {
			state = state * 6364136223846793005ULL +
				1442695040888963407ULL;
			field[j] = (uint32_t)(state >> 32);
		}
		uint32_t src = field[0];
		uint32_t dst = field[1];
		uint32_t proto = field[2] & 0xff;
		uint32_t sport = field[3] & 0xffff;
		uint32_t dport = field[4] & 0xffff;
		uint32_t ip_id = field[5] & 0xffff;
		uint32_t len = field[6] & 0xffff;

		printf("%08x %08x %02x %04x %04x %04x %04x %016llx\n",
		       src, dst, proto, sport, dport, ip_id, len,
		       flow_key_digest(src, dst, proto, sport, dport,
				       ip_id, len));
	}
	return 0;
}
