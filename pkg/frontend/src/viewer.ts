/** Three.js viewport rendering variants as wireframe box abstractions. */

import * as THREE from "three";
import { Vec3 } from "./types.js";

const LABEL_COLORS: Record<string, number> = {
  base: 0x8899aa,
  drawer: 0xe0a040,
  door: 0x50b060,
  tray: 0xb0803d,
  shelf: 0x777777,
  knob: 0xcc5555,
  wheel: 0x5555cc,
  handle: 0xddcc44,
};

const EDGE_PAIRS = [
  [0, 1], [2, 3], [4, 5], [6, 7],
  [0, 2], [1, 3], [4, 6], [5, 7],
  [0, 4], [1, 5], [2, 6], [3, 7],
];

export class BoxViewer {
  renderer: THREE.WebGLRenderer;
  scene = new THREE.Scene();
  camera: THREE.PerspectiveCamera;
  private boxGroup = new THREE.Group();

  constructor(canvas: HTMLCanvasElement) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.camera = new THREE.PerspectiveCamera(40, canvas.width / canvas.height, 0.01, 100);
    this.camera.position.set(3.2, -3.6, 2.4);
    this.camera.up.set(0, 0, 1);
    this.camera.lookAt(0, 0, 0);
    this.scene.background = new THREE.Color(0x141619);
    this.scene.add(new THREE.AxesHelper(1.2));
    this.scene.add(this.boxGroup);
  }

  /** Replace the displayed boxes; one entry of 8 corners per part. */
  setBoxes(corners: Vec3[][], labels: string[], highlight: number[] = []): void {
    this.boxGroup.clear();
    corners.forEach((box, i) => {
      const positions: number[] = [];
      for (const [a, b] of EDGE_PAIRS) {
        positions.push(...box[a], ...box[b]);
      }
      const geom = new THREE.BufferGeometry();
      geom.setAttribute("position", new THREE.Float32BufferAttribute(positions, 3));
      const color = LABEL_COLORS[labels[i]] ?? 0xffffff;
      const mat = new THREE.LineBasicMaterial({
        color,
        linewidth: highlight.includes(i) ? 3 : 1,
      });
      this.boxGroup.add(new THREE.LineSegments(geom, mat));
    });
    this.render();
  }

  render(): void {
    this.renderer.render(this.scene, this.camera);
  }
}
