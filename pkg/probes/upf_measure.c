/*
 * TC ingress classifiers for per-UPF forwarding-delay measurement.
 *
 * Six sections, one M1/M3 pair per UPF namespace:
 *   m1_upf1/2/3  - eth0 ingress: timestamp GTP-U G-PDU arrival (N3),
 *                  emit TEID + flow key of the inner packet.
 *   m3_upf1/2/3  - ogstun ingress: timestamp decapsulated IP delivery
 *                  (N6 side), emit the same flow key.
 *
 * Lines go out through the printk trace facility prefixed "TCBPF: " and
 * parse with the userspace codec. Verdict is always TC_ACT_OK: the
 * probes never drop, modify, or redirect.
 *
 * Deliberately conservative parsing: fixed 20-byte IP headers (packets
 * with IP options pass un-instrumented, on both hooks, so key equality
 * is preserved), no VLAN, IPv4 only. Every packet access sits behind an
 * explicit bounds check against data_end; per-packet work is a fixed
 * straight-line sequence, no loops.
 */
#include <linux/bpf.h>
#include <linux/pkt_cls.h>
#include "flowkey.h"

#define SEC(name) __attribute__((section(name), used))

static long (*bpf_trace_printk)(const char *fmt, __u32 fmt_size,
				...) = (void *)6;
static __u64 (*bpf_ktime_get_ns)(void) = (void *)5;

#if __BYTE_ORDER__ == __ORDER_LITTLE_ENDIAN__
#define ntohs16(x) __builtin_bswap16(x)
#define ntohl32(x) __builtin_bswap32(x)
#else
#define ntohs16(x) (x)
#define ntohl32(x) (x)
#endif

#define ETH_HLEN 14
#define ETH_P_IP 0x0800
#define PROTO_TCP 6
#define PROTO_UDP 17
#define GTPU_PORT 2152
#define GTPU_GPDU 0xff

/* eth(14) + outer IPv4 without options(20) + UDP(8) */
#define GTP_OFF (ETH_HLEN + 20 + 8)

struct pkt_view {
	fk_u64 key;
	fk_u32 teid;
};

/*
 * Inner IPv4 at a fixed offset; fills in the flow digest.
 * Returns 0 on success, -1 when the packet is not plain IPv4 or the
 * capture ends early (caller passes it through silently).
 */
static __always_inline int inner_flow_key(void *data, void *data_end,
					  __u64 off, fk_u64 *key)
{
	__u8 *ip = (__u8 *)data + off;

	if ((void *)(ip + 20) > data_end)
		return -1;
	if (ip[0] != 0x45)	/* IPv4, no options */
		return -1;

	fk_u32 total_len = ntohs16(*(__u16 *)(ip + 2));
	fk_u32 ip_id = ntohs16(*(__u16 *)(ip + 4));
	fk_u32 proto = ip[9];
	fk_u32 src = ntohl32(*(__u32 *)(ip + 12));
	fk_u32 dst = ntohl32(*(__u32 *)(ip + 16));
	fk_u32 sport = 0, dport = 0;

	if (proto == PROTO_TCP || proto == PROTO_UDP) {
		if ((void *)(ip + 24) > data_end)
			return -1;
		sport = ntohs16(*(__u16 *)(ip + 20));
		dport = ntohs16(*(__u16 *)(ip + 22));
	}
	*key = flow_key_digest(src, dst, proto, sport, dport, ip_id, total_len);
	return 0;
}

/*
 * N3 view: outer Ethernet/IPv4/UDP:2152, GTP-U G-PDU, then the inner
 * packet at +8 or +12 depending on the option flags.
 */
static __always_inline int parse_m1(struct __sk_buff *skb, struct pkt_view *v)
{
	void *data = (void *)(long)skb->data;
	void *data_end = (void *)(long)skb->data_end;
	__u8 *p = data;

	if ((void *)(p + GTP_OFF + 8) > data_end)
		return -1;
	if (ntohs16(*(__u16 *)(p + 12)) != ETH_P_IP)
		return -1;
	if (p[ETH_HLEN] != 0x45)	/* outer IPv4, no options */
		return -1;
	if (p[ETH_HLEN + 9] != PROTO_UDP)
		return -1;
	if (ntohs16(*(__u16 *)(p + ETH_HLEN + 22)) != GTPU_PORT)
		return -1;

	__u8 flags = p[GTP_OFF];
	if ((flags >> 5) != 1)	/* GTP version */
		return -1;
	if (p[GTP_OFF + 1] != GTPU_GPDU)	/* echo etc. pass silently */
		return -1;
	v->teid = ntohl32(*(__u32 *)(p + GTP_OFF + 4));

	/* any of E/S/PN pulls in the 4-byte option block */
	if (flags & 0x07)
		return inner_flow_key(data, data_end, GTP_OFF + 12, &v->key);
	return inner_flow_key(data, data_end, GTP_OFF + 8, &v->key);
}

/* N6 view: ogstun is an L3 device, the IP header starts at offset 0. */
static __always_inline int parse_m3(struct __sk_buff *skb, fk_u64 *key)
{
	void *data = (void *)(long)skb->data;
	void *data_end = (void *)(long)skb->data_end;

	return inner_flow_key(data, data_end, 0, key);
}

#define M1_PROG(ns)							\
SEC("m1_" #ns)								\
int m1_##ns##_prog(struct __sk_buff *skb)				\
{									\
	struct pkt_view v;						\
	if (parse_m1(skb, &v) == 0) {					\
		char fmt[] = "TCBPF: M1 ns=" #ns			\
			" key=%llx teid=%x ts=%llu\n";			\
		bpf_trace_printk(fmt, sizeof(fmt), v.key, v.teid,	\
				 bpf_ktime_get_ns());			\
	}								\
	return TC_ACT_OK;						\
}

#define M3_PROG(ns)							\
SEC("m3_" #ns)								\
int m3_##ns##_prog(struct __sk_buff *skb)				\
{									\
	fk_u64 key;							\
	if (parse_m3(skb, &key) == 0) {					\
		char fmt[] = "TCBPF: M3 ns=" #ns " key=%llx ts=%llu\n";	\
		bpf_trace_printk(fmt, sizeof(fmt), key,			\
				 bpf_ktime_get_ns());			\
	}								\
	return TC_ACT_OK;						\
}

M1_PROG(upf1)
M1_PROG(upf2)
M1_PROG(upf3)
M3_PROG(upf1)
M3_PROG(upf2)
M3_PROG(upf3)

char _license[] SEC("license") = "GPL";
