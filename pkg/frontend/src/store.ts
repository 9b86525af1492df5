/** Studio session state: one draft, generated variants, the articulation
 * slider, and the constraint feedback loop. At most one generate request is
 * in flight; later submissions queue client-side. */

import { StudioApi } from "./api.js";
import { posedCorners } from "./kinematics.js";
import { toRequest } from "./validate.js";
import {
  ConstraintDraft,
  GenerateResponseWire,
  LockableAttribute,
  ObjectDoc,
  Vec3,
} from "./types.js";
import { byId, emptyDraft } from "./graph.js";

export interface Variant {
  seed: number;
  object: ObjectDoc;
  assembled?: { base: string; parts: string[] };
}

export type Listener = () => void;

export class StudioStore {
  draft: ConstraintDraft = emptyDraft();
  variants: Variant[] = [];
  tau = 0;
  selected = 0;
  busy = false;
  lastError: string | null = null;

  private queue: Array<() => void> = [];
  private listeners: Listener[] = [];

  constructor(public api: StudioApi) {}

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private notify(): void {
    for (const fn of this.listeners) fn();
  }

  setTau(tau: number): void {
    this.tau = Math.min(1, Math.max(0, tau));
    this.notify();
  }

  /** Client-side poses for a variant at the current slider position. */
  posesFor(variantIndex: number, tau = this.tau): Vec3[][] {
    return posedCorners(this.variants[variantIndex].object, tau);
  }

  /** Max |client - server| corner coordinate for a variant at tau. */
  async serverDivergence(variantIndex: number, tau = this.tau): Promise<number> {
    const object = this.variants[variantIndex].object;
    const server = await this.api.articulate(object, tau);
    const client = this.posesFor(variantIndex, tau);
    let worst = 0;
    for (const box of server.boxes) {
      const mine = client[box.node];
      box.corners.forEach((corner, k) => {
        for (let a = 0; a < 3; a++) {
          worst = Math.max(worst, Math.abs(corner[a] - mine[k][a]));
        }
      });
    }
    return worst;
  }

  /** Submit the draft; resolves with the new variants. Queued while busy. */
  generate(): Promise<Variant[]> {
    return new Promise((resolve, reject) => {
      const run = async () => {
        this.busy = true;
        this.lastError = null;
        this.notify();
        try {
          const response: GenerateResponseWire = await this.api.generate(toRequest(this.draft));
          this.variants = response.samples.map((s) => ({
            seed: s.seed,
            object: s.object,
            assembled: s.assembled,
          }));
          this.selected = 0;
          resolve(this.variants);
        } catch (err) {
          this.lastError = err instanceof Error ? err.message : String(err);
          reject(err);
        } finally {
          this.busy = false;
          this.notify();
          const next = this.queue.shift();
          if (next) next();
        }
      };
      if (this.busy) this.queue.push(run);
      else void run();
    });
  }

  /** Copy a variant's attributes back into the draft and lock them. */
  useAsConstraint(variantIndex: number, attributes: LockableAttribute[]): void {
    const object = this.variants[variantIndex].object;
    if (object.parts.length !== this.draft.nodes.length) {
      throw new Error("variant does not match the draft's node count");
    }
    object.parts.forEach((part, i) => {
      const node = this.draft.nodes[i];
      for (const attr of attributes) {
        node.locks.add(attr);
        if (attr === "bbox") node.bbox = { min: [...part.bbox_min], max: [...part.bbox_max] };
        if (attr === "joint_type") node.jointType = part.joint.type;
        if (attr === "joint_axis") {
          node.axis = { direction: [...part.joint.axis_dir], origin: [...part.joint.axis_origin] };
        }
        if (attr === "joint_range") node.range = [...part.joint.range];
      }
    });
    this.notify();
  }

  unlock(nodeId: number, attribute: LockableAttribute): void {
    const node = byId(this.draft, nodeId);
    if (node) {
      node.locks.delete(attribute);
      this.notify();
    }
  }
}
