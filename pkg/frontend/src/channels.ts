/** Channel metadata for the 19-channel hand, mirrored from the service. */

export const CHANNEL_COUNT = 19;

export const PALM_A = 16;
export const PALM_BEND = 17;
export const THUMB_ABDUCTION = 18;

export const SUPPLY_KPA = 150;

export interface ChannelInfo {
  /** Service channel index. */
  index: number;
  /** Human label, e.g. "index seg 1 L". */
  label: string;
  /** Panel group heading. */
  group: string;
  /** Client-side safety limit [kPa]; the service enforces the same. */
  limitKpa: number;
}

const FINGER_GROUPS: ReadonlyArray<readonly [string, number]> = [
  ["thumb", 4],
  ["index", 4],
  ["middle", 4],
  ["ring", 2],
  ["little", 2],
];

function buildChannels(): ChannelInfo[] {
  const out: ChannelInfo[] = [];
  let index = 0;
  for (const [finger, count] of FINGER_GROUPS) {
    for (let i = 0; i < count; i += 1) {
      const pair = Math.floor(i / 2) + 1;
      const side = i % 2 === 0 ? "L" : "R";
      const label =
        count === 2 ? `${finger} ${side}` : `${finger} grp ${pair} ${side}`;
      out.push({ index, label, group: finger, limitKpa: 80 });
      index += 1;
    }
  }
  out.push({ index: PALM_A, label: "palm splay", group: "palm", limitKpa: 100 });
  out.push({ index: PALM_BEND, label: "palm bend", group: "palm", limitKpa: 40 });
  out.push({
    index: THUMB_ABDUCTION,
    label: "thumb abduction",
    group: "palm",
    limitKpa: 40,
  });
  return out;
}

export const CHANNELS: ReadonlyArray<ChannelInfo> = buildChannels();

export function channelLimit(index: number): number {
  const info = CHANNELS[index];
  if (info === undefined) throw new Error(`unknown channel ${index}`);
  return info.limitKpa;
}

/** Channels grouped for the panel, in display order. */
export function panelGroups(): Map<string, ChannelInfo[]> {
  const groups = new Map<string, ChannelInfo[]>();
  for (const ch of CHANNELS) {
    const bucket = groups.get(ch.group) ?? [];
    bucket.push(ch);
    groups.set(ch.group, bucket);
  }
  return groups;
}
