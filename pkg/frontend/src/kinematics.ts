/** Client-side posing: the five joint formulas, duplicated for smooth slider
 * scrubbing. The server (/api/articulate) stays authoritative; a cross-check
 * mode compares both paths. */

import { ObjectDoc, PartDoc, Vec3 } from "./types.js";

export const SCREW_PITCH = 0.1; // translation per full turn, normalized units

export type Mat3 = [Vec3, Vec3, Vec3];

export interface RigidTransform {
  rotation: Mat3;
  translation: Vec3;
}

export const IDENTITY: RigidTransform = {
  rotation: [
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
  ],
  translation: [0, 0, 0],
};

function matVec(m: Mat3, v: Vec3): Vec3 {
  return [
    m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
    m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
    m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
  ];
}

function matMat(a: Mat3, b: Mat3): Mat3 {
  const out: Mat3 = [
    [0, 0, 0],
    [0, 0, 0],
    [0, 0, 0],
  ];
  for (let i = 0; i < 3; i++)
    for (let j = 0; j < 3; j++)
      out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
  return out;
}

function add(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function scale(v: Vec3, s: number): Vec3 {
  return [v[0] * s, v[1] * s, v[2] * s];
}

export function apply(t: RigidTransform, p: Vec3): Vec3 {
  return add(matVec(t.rotation, p), t.translation);
}

/** this-after-other composition: (a ∘ b)(p) = a(b(p)). */
export function compose(a: RigidTransform, b: RigidTransform): RigidTransform {
  return {
    rotation: matMat(a.rotation, b.rotation),
    translation: add(matVec(a.rotation, b.translation), a.translation),
  };
}

function rotationAboutAxis(dir: Vec3, degrees: number): Mat3 {
  const th = (degrees * Math.PI) / 180;
  const [kx, ky, kz] = dir;
  const c = Math.cos(th);
  const s = Math.sin(th);
  const t = 1 - c;
  return [
    [c + kx * kx * t, kx * ky * t - kz * s, kx * kz * t + ky * s],
    [ky * kx * t + kz * s, c + ky * ky * t, ky * kz * t - kx * s],
    [kz * kx * t - ky * s, kz * ky * t + kx * s, c + kz * kz * t],
  ];
}

function rotationAboutLine(dir: Vec3, origin: Vec3, degrees: number): RigidTransform {
  const rot = rotationAboutAxis(dir, degrees);
  return { rotation: rot, translation: sub(origin, matVec(rot, origin)) };
}

export function jointTransform(part: PartDoc, tau: number): RigidTransform {
  const [lo, hi] = part.joint.range;
  const value = lo + (hi - lo) * tau;
  const dir = part.joint.axis_dir;
  const origin = part.joint.axis_origin;
  switch (part.joint.type) {
    case "fixed":
      return IDENTITY;
    case "revolute":
      return rotationAboutLine(dir, origin, value);
    case "prismatic":
      return { rotation: IDENTITY.rotation, translation: scale(dir, value) };
    case "continuous":
      return rotationAboutLine(dir, origin, tau * 360);
    case "screw": {
      const turn = rotationAboutLine(dir, origin, (value / SCREW_PITCH) * 360);
      return { rotation: turn.rotation, translation: add(turn.translation, scale(dir, value)) };
    }
  }
}

/** World transform per part: parent world composed with the local joint. */
export function worldTransforms(doc: ObjectDoc, tau: number): RigidTransform[] {
  const n = doc.parts.length;
  const out: (RigidTransform | null)[] = new Array(n).fill(null);
  const resolve = (i: number): RigidTransform => {
    const cached = out[i];
    if (cached) return cached;
    const local = jointTransform(doc.parts[i], tau);
    const parent = doc.parts[i].parent;
    const world = parent === null ? local : compose(resolve(parent), local);
    out[i] = world;
    return world;
  };
  for (let i = 0; i < n; i++) resolve(i);
  return out as RigidTransform[];
}

/** 8 box corners in bit order (x -> bit 0, y -> bit 1, z -> bit 2), matching
 * the server's corner convention so poses can be compared elementwise. */
export function boxCorners(min: Vec3, max: Vec3): Vec3[] {
  const corners: Vec3[] = [];
  for (let i = 0; i < 8; i++) {
    corners.push([
      i & 1 ? max[0] : min[0],
      i & 2 ? max[1] : min[1],
      i & 4 ? max[2] : min[2],
    ]);
  }
  return corners;
}

export function posedCorners(doc: ObjectDoc, tau: number): Vec3[][] {
  const transforms = worldTransforms(doc, tau);
  return doc.parts.map((part, i) =>
    boxCorners(part.bbox_min, part.bbox_max).map((c) => apply(transforms[i], c)),
  );
}
