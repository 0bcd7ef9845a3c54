import os

from setuptools import setup, find_packages

# Dump the README.md file
with open(os.path.join(os.path.abspath(os.path.dirname(__file__)), 'README.md')) as f:
    long_description = f.read()

setup(
    name='mcre-lab',
    packages=find_packages(exclude=['mcrelab.test']),
    test_suite='mcrelab.test',
    install_requires=[
      'numpy',
      'scipy',
      'pyyaml',
      'pydantic>=2'
    ],
    entry_points={
        'console_scripts': ['mcre-lab=mcrelab.cli.main:main']
    },
    license='Apache License 2.0',
    platforms=['any'],
    python_requires='>=3.8',
    version='0.1',
    description='Convergence laboratory for Markov chains in random environments.',
    long_description=long_description,
    long_description_content_type="text/markdown",
    keywords=['markov chain', 'random environment', 'coupling', 'sgld', 'queueing'],
    classifiers=[
        'Intended Audience :: Science/Research',
        'Programming Language :: Python :: 3',
        'License :: OSI Approved :: Apache Software License',
        'Topic :: Scientific/Engineering :: Mathematics',
        'Development Status :: 3 - Alpha'
    ],
)
